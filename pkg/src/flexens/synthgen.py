"""Seeded synthetic logit generator.

Produces ensembles whose score margins correlate with correctness. Each
sample gets a uniformly random label and a difficulty d in [0, 1); the true
class receives a signal of signal_scale * (1 - d) and every model sees that
signal plus independent per-class Gaussian noise. Easy samples therefore
yield large margins and hard samples small ones, and averaging across
models cancels noise, so bigger ensembles genuinely classify better.

The random stream is pinned down so a dataset is reproducible bit-for-bit
from its config alone:

- generator: xoshiro256++, its four state words seeded with consecutive
  splitmix64 outputs of the seed;
- uniform doubles in [0, 1): (next_u64 >> 11) * 2**-53;
- standard normals: Box-Muller on consecutive uniform pairs (u1, u2),
  radius sqrt(-2 * ln(1 - u1)), cosine branch first, then sine; when an odd
  number of normals is needed the final sine draw is discarded;
- draw order: one uniform per sample for labels (floor(u * num_classes),
  clamped to num_classes - 1), one per sample for difficulties, then noise
  normals in model-major (model, sample, class) order. Noise draws are
  consumed even when noise_sigma is zero, so the stream layout does not
  depend on sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset_io import EnsembleDataset
from .errors import InvalidConfigError

DEFAULT_SIGNAL_SCALE = 4.0
DEFAULT_NOISE_SIGMA = 1.0
DEFAULT_COST_MS = 1.667

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi


class Xoshiro256PlusPlus:
    """xoshiro256++ with splitmix64 state initialization."""

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        state = seed & _MASK64
        words = []
        for _ in range(4):
            state = (state + 0x9E3779B97F4A7C15) & _MASK64
            z = state
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            words.append(z ^ (z >> 31))
        self._s0, self._s1, self._s2, self._s3 = words

    def next_uint64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        t = (s0 + s3) & _MASK64
        result = ((((t << 23) & _MASK64) | (t >> 41)) + s0) & _MASK64
        shifted = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= shifted
        s3 = ((s3 << 45) & _MASK64) | (s3 >> 19)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def next_float(self) -> float:
        # 53 high bits give a uniform double in [0, 1)
        return (self.next_uint64() >> 11) * 2.0**-53


def _standard_normals(rng: Xoshiro256PlusPlus, count: int) -> list[float]:
    out: list[float] = []
    append = out.append
    sqrt, log1p, cos, sin = math.sqrt, math.log1p, math.cos, math.sin
    for _ in range((count + 1) // 2):
        u1 = rng.next_float()
        u2 = rng.next_float()
        radius = sqrt(-2.0 * log1p(-u1))  # 1 - u1 is in (0, 1], so this is finite
        angle = _TWO_PI * u2
        append(radius * cos(angle))
        append(radius * sin(angle))
    del out[count:]
    return out


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic generator; costs_ms=None means DEFAULT_COST_MS per model."""

    num_models: int
    num_samples: int
    num_classes: int
    seed: int
    signal_scale: float = DEFAULT_SIGNAL_SCALE
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    costs_ms: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.num_models < 1:
            raise InvalidConfigError("num_models must be >= 1")
        if self.num_samples < 1:
            raise InvalidConfigError("num_samples must be >= 1")
        if self.num_classes < 2:
            raise InvalidConfigError("num_classes must be >= 2")
        if not isinstance(self.seed, int) or not (0 <= self.seed <= _MASK64):
            raise InvalidConfigError("seed must be an integer in [0, 2**64)")
        if not (math.isfinite(self.signal_scale) and self.signal_scale > 0.0):
            raise InvalidConfigError("signal_scale must be finite and > 0")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0.0):
            raise InvalidConfigError("noise_sigma must be finite and >= 0")
        if self.costs_ms is not None:
            costs = tuple(float(c) for c in self.costs_ms)
            if len(costs) != self.num_models:
                raise InvalidConfigError(
                    f"costs_ms must have {self.num_models} entries, got {len(costs)}"
                )
            if any(not (math.isfinite(c) and c > 0.0) for c in costs):
                raise InvalidConfigError("every cost must be finite and > 0")
            object.__setattr__(self, "costs_ms", costs)

    def resolved_costs(self) -> tuple[float, ...]:
        if self.costs_ms is not None:
            return self.costs_ms
        return (DEFAULT_COST_MS,) * self.num_models


def generate(config: SynthConfig) -> EnsembleDataset:
    """Deterministically generate a dataset from the config (see module docs)."""
    n, m, c = config.num_models, config.num_samples, config.num_classes
    rng = Xoshiro256PlusPlus(config.seed)

    # min() guards the theoretical case where u * c rounds up to c
    labels = np.array(
        [min(int(rng.next_float() * c), c - 1) for _ in range(m)], dtype=np.int64
    )
    difficulties = np.array([rng.next_float() for _ in range(m)], dtype=np.float64)

    base = np.zeros((m, c), dtype=np.float64)
    base[np.arange(m), labels] = config.signal_scale * (1.0 - difficulties)

    noise = np.array(_standard_normals(rng, n * m * c), dtype=np.float64).reshape(n, m, c)
    logits = base[np.newaxis, :, :] + config.noise_sigma * noise

    return EnsembleDataset(
        logits=logits.astype(np.float32),
        labels=labels,
        costs_ms=np.array(config.resolved_costs(), dtype=np.float64),
    )
