"""Ensemble dataset model and its on-disk formats.

A dataset directory holds one JSON manifest plus little-endian binary
payloads:

    manifest.json    {"version": 1, "num_models": N, "num_samples": M,
                      "num_classes": C, "logit_files": [... N paths ...],
                      "label_file": "...", "costs_ms": [... N numbers ...]}
    logits_###.ensl  magic "ENSL", u32 version=1, u32 M, u32 C, then
                     M*C float32 logits, row-major by sample
    labels.ensy      magic "ENSY", u32 version=1, u32 M, then M u32 labels

Logits are stored and held in memory as 32-bit floats; numerical code
promotes to 64-bit at the point of computation. Costs live only in the
manifest so the same tensors can be re-costed without rewriting payloads.
File paths in the manifest are relative to the manifest's directory.

Every ingest path validates the full set of invariants up front; a bad
value is rejected with a coordinate-bearing error, never deferred to
computation time.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    CsvParseError,
    DatasetFormatError,
    DimensionMismatchError,
    LabelOutOfRangeError,
    MalformedManifestError,
    NonFiniteLogitError,
    NonPositiveCostError,
    RaggedRowsError,
    ValidationError,
)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
LOGIT_MAGIC = b"ENSL"
LABEL_MAGIC = b"ENSY"

_HEADER = struct.Struct("<4sIII")  # magic, version, M, C (labels reuse it with C slot unused)
_LABEL_HEADER = struct.Struct("<4sII")  # magic, version, M


@dataclass(frozen=True, eq=False)
class EnsembleDataset:
    """Per-model logit tensors with labels and per-model execution costs.

    Instances are validated on construction and their arrays are frozen
    (non-writeable), so a dataset can be shared across concurrent readers.
    """

    logits: np.ndarray  # (num_models, num_samples, num_classes) float32
    labels: np.ndarray  # (num_samples,) int64
    costs_ms: np.ndarray  # (num_models,) float64

    def __post_init__(self):
        logits = np.array(self.logits, dtype=np.float32, order="C")
        if logits.ndim != 3:
            raise DimensionMismatchError(
                f"logits must be a 3-D (models, samples, classes) tensor, got {logits.ndim}-D"
            )
        num_models, num_samples, num_classes = logits.shape
        if num_models < 1:
            raise DimensionMismatchError("need at least 1 model")
        if num_samples < 1:
            raise DimensionMismatchError("need at least 1 sample")
        if num_classes < 2:
            raise DimensionMismatchError(
                "need at least 2 classes (the score margin is undefined otherwise)"
            )

        raw_labels = np.asarray(self.labels)
        if raw_labels.dtype.kind not in "iu":
            raise ValidationError(f"labels must be integers, got dtype {raw_labels.dtype}")
        labels = np.array(raw_labels, dtype=np.int64)
        if labels.shape != (num_samples,):
            raise DimensionMismatchError(
                f"labels must have shape ({num_samples},), got {labels.shape}"
            )

        costs = np.array(self.costs_ms, dtype=np.float64)
        if costs.shape != (num_models,):
            raise DimensionMismatchError(
                f"costs_ms must have shape ({num_models},), got {costs.shape}"
            )

        bad = ~np.isfinite(logits)
        if bad.any():
            model, sample, class_index = (int(v) for v in np.argwhere(bad)[0])
            raise NonFiniteLogitError(model, sample, class_index)

        out_of_range = (labels < 0) | (labels >= num_classes)
        if out_of_range.any():
            sample = int(np.argmax(out_of_range))
            raise LabelOutOfRangeError(sample, int(labels[sample]), num_classes)

        bad_cost = ~(np.isfinite(costs) & (costs > 0.0))
        if bad_cost.any():
            model = int(np.argmax(bad_cost))
            raise NonPositiveCostError(model, float(costs[model]))

        for arr in (logits, labels, costs):
            arr.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "costs_ms", costs)

    @property
    def num_models(self) -> int:
        return self.logits.shape[0]

    @property
    def num_samples(self) -> int:
        return self.logits.shape[1]

    @property
    def num_classes(self) -> int:
        return self.logits.shape[2]


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed manifest contents; paths are relative to the manifest directory."""

    version: int
    num_models: int
    num_samples: int
    num_classes: int
    logit_files: tuple[str, ...]
    label_file: str
    costs_ms: tuple[float, ...]


def save_dataset(dataset: EnsembleDataset, directory) -> DatasetManifest:
    """Write manifest plus binary payloads into `directory` (created if absent).

    Two saves of the same dataset produce byte-identical files, and
    load_dataset(save_dataset(d)) reproduces d bit-for-bit.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)

    logit_files = [f"logits_{i:03d}.ensl" for i in range(dataset.num_models)]
    for i, name in enumerate(logit_files):
        header = _HEADER.pack(
            LOGIT_MAGIC, FORMAT_VERSION, dataset.num_samples, dataset.num_classes
        )
        payload = np.ascontiguousarray(dataset.logits[i], dtype="<f4").tobytes()
        (root / name).write_bytes(header + payload)

    label_file = "labels.ensy"
    label_header = _LABEL_HEADER.pack(LABEL_MAGIC, FORMAT_VERSION, dataset.num_samples)
    label_payload = dataset.labels.astype("<u4").tobytes()
    (root / label_file).write_bytes(label_header + label_payload)

    costs = tuple(float(c) for c in dataset.costs_ms)
    manifest = DatasetManifest(
        version=FORMAT_VERSION,
        num_models=dataset.num_models,
        num_samples=dataset.num_samples,
        num_classes=dataset.num_classes,
        logit_files=tuple(logit_files),
        label_file=label_file,
        costs_ms=costs,
    )
    doc = {
        "version": manifest.version,
        "num_models": manifest.num_models,
        "num_samples": manifest.num_samples,
        "num_classes": manifest.num_classes,
        "logit_files": list(manifest.logit_files),
        "label_file": manifest.label_file,
        "costs_ms": list(manifest.costs_ms),
    }
    (root / MANIFEST_NAME).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return manifest


def _manifest_int(doc: dict, key: str) -> int:
    value = doc.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise MalformedManifestError(f"manifest key {key!r} must be an integer")
    return value


def _parse_manifest(doc, path: Path) -> DatasetManifest:
    if not isinstance(doc, dict):
        raise MalformedManifestError(f"{path}: manifest must be a JSON object")
    for key in (
        "version",
        "num_models",
        "num_samples",
        "num_classes",
        "logit_files",
        "label_file",
        "costs_ms",
    ):
        if key not in doc:
            raise MalformedManifestError(f"{path}: manifest key {key!r} is missing")

    version = _manifest_int(doc, "version")
    if version != FORMAT_VERSION:
        raise MalformedManifestError(
            f"{path}: unsupported manifest version {version}, expected {FORMAT_VERSION}"
        )
    num_models = _manifest_int(doc, "num_models")
    num_samples = _manifest_int(doc, "num_samples")
    num_classes = _manifest_int(doc, "num_classes")
    if num_models < 1 or num_samples < 1:
        raise MalformedManifestError(f"{path}: num_models and num_samples must be >= 1")
    if num_classes < 2:
        raise MalformedManifestError(f"{path}: num_classes must be >= 2")

    logit_files = doc["logit_files"]
    if not isinstance(logit_files, list) or not all(isinstance(f, str) for f in logit_files):
        raise MalformedManifestError(f"{path}: logit_files must be a list of strings")
    if len(logit_files) != num_models:
        raise MalformedManifestError(
            f"{path}: expected {num_models} logit files, found {len(logit_files)}"
        )
    label_file = doc["label_file"]
    if not isinstance(label_file, str):
        raise MalformedManifestError(f"{path}: label_file must be a string")
    costs = doc["costs_ms"]
    if not isinstance(costs, list) or not all(
        isinstance(c, (int, float)) and not isinstance(c, bool) for c in costs
    ):
        raise MalformedManifestError(f"{path}: costs_ms must be a list of numbers")
    if len(costs) != num_models:
        raise MalformedManifestError(
            f"{path}: expected {num_models} costs, found {len(costs)}"
        )
    return DatasetManifest(
        version=version,
        num_models=num_models,
        num_samples=num_samples,
        num_classes=num_classes,
        logit_files=tuple(logit_files),
        label_file=label_file,
        costs_ms=tuple(float(c) for c in costs),
    )


def _read_header(data: bytes, path: Path, magic: bytes, size: int) -> tuple:
    if len(data) < size:
        raise DatasetFormatError(f"{path}: file too short for its header")
    if data[:4] != magic:
        raise DatasetFormatError(
            f"{path}: bad magic {data[:4]!r}, expected {magic.decode('ascii')!r}"
        )
    return data


def load_dataset(manifest_path) -> EnsembleDataset:
    """Load and fully validate a dataset directory given its manifest path."""
    path = Path(manifest_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedManifestError(f"{path}: invalid JSON: {exc}") from exc
    manifest = _parse_manifest(doc, path)

    base = path.parent
    n, m, c = manifest.num_models, manifest.num_samples, manifest.num_classes

    logits = np.empty((n, m, c), dtype=np.float32)
    for i, name in enumerate(manifest.logit_files):
        file_path = base / name
        data = _read_header(file_path.read_bytes(), file_path, LOGIT_MAGIC, _HEADER.size)
        _, version, file_m, file_c = _HEADER.unpack_from(data)
        if version != FORMAT_VERSION:
            raise DatasetFormatError(
                f"{file_path}: unsupported payload version {version}"
            )
        if (file_m, file_c) != (m, c):
            raise DimensionMismatchError(
                f"{file_path}: header declares {file_m}x{file_c}, manifest says {m}x{c}"
            )
        expected = _HEADER.size + 4 * m * c
        if len(data) != expected:
            raise DimensionMismatchError(
                f"{file_path}: payload is {len(data)} bytes, expected {expected}"
            )
        logits[i] = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(m, c)

    label_path = base / manifest.label_file
    data = _read_header(label_path.read_bytes(), label_path, LABEL_MAGIC, _LABEL_HEADER.size)
    _, version, file_m = _LABEL_HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"{label_path}: unsupported payload version {version}")
    if file_m != m:
        raise DimensionMismatchError(
            f"{label_path}: header declares {file_m} labels, manifest says {m}"
        )
    expected = _LABEL_HEADER.size + 4 * m
    if len(data) != expected:
        raise DimensionMismatchError(
            f"{label_path}: payload is {len(data)} bytes, expected {expected}"
        )
    labels = np.frombuffer(data, dtype="<u4", offset=_LABEL_HEADER.size).astype(np.int64)

    return EnsembleDataset(logits=logits, labels=labels, costs_ms=np.array(manifest.costs_ms))


def _read_csv_rows(path: Path) -> list[list[str]]:
    lines = path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline, not an empty row
    rows = []
    for raw in lines:
        line = raw[:-1] if raw.endswith("\r") else raw
        rows.append(line.split(","))
    return rows


def import_csv(logits_csvs: Sequence, labels_csv, costs_ms) -> EnsembleDataset:
    """Build a dataset from per-model logit CSVs plus a label CSV.

    Files have no header row; logit cells are parsed as decimal reals and
    stored at the canonical 32-bit precision (values outside float32 range
    are rejected as non-finite). All logit files must agree on their row and
    column counts.
    """
    if len(logits_csvs) == 0:
        raise DimensionMismatchError("need at least one logits CSV")
    costs = np.asarray(costs_ms, dtype=np.float64)
    if costs.shape != (len(logits_csvs),):
        raise DimensionMismatchError(
            f"expected {len(logits_csvs)} costs, got shape {costs.shape}"
        )

    matrices = []
    num_samples = num_classes = None
    for csv_path in logits_csvs:
        path = Path(csv_path)
        rows = _read_csv_rows(path)
        if not rows:
            raise CsvParseError(str(path), 0, 0, "file contains no data rows")
        width = len(rows[0])
        matrix = np.empty((len(rows), width), dtype=np.float64)
        for r, cells in enumerate(rows):
            if len(cells) != width:
                raise RaggedRowsError(str(path), r, width, len(cells))
            for col, cell in enumerate(cells):
                try:
                    matrix[r, col] = float(cell)
                except ValueError as exc:
                    raise CsvParseError(
                        str(path), r, col, f"cannot parse {cell!r} as a real number"
                    ) from exc
        if num_samples is None:
            num_samples, num_classes = matrix.shape
        elif matrix.shape != (num_samples, num_classes):
            raise DimensionMismatchError(
                f"{path}: shape {matrix.shape} disagrees with first file "
                f"({num_samples}, {num_classes})"
            )
        matrices.append(matrix)

    label_path = Path(labels_csv)
    rows = _read_csv_rows(label_path)
    if len(rows) != num_samples:
        raise DimensionMismatchError(
            f"{label_path}: {len(rows)} label rows for {num_samples} samples"
        )
    labels = np.empty(num_samples, dtype=np.int64)
    for r, cells in enumerate(rows):
        if len(cells) != 1:
            raise RaggedRowsError(str(label_path), r, 1, len(cells))
        try:
            labels[r] = int(cells[0])
        except ValueError as exc:
            raise CsvParseError(
                str(label_path), r, 0, f"cannot parse {cells[0]!r} as an integer"
            ) from exc

    logits = np.stack(matrices).astype(np.float32)
    return EnsembleDataset(logits=logits, labels=labels, costs_ms=costs)
