"""Shared types, validation and the deterministic random stream."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _backend

PROB_CLAMP = 1e-12
MAX_SAMPLE_INDEX = 2**32
UINT64_MAX = 2**64 - 1


class SmoothingError(ValueError):
    """Base class for every error raised by this package."""


class DimensionMismatch(SmoothingError):
    pass


class NonPositiveScale(SmoothingError):
    pass


class NonFiniteEntry(SmoothingError):
    pass


class NonFiniteInput(SmoothingError):
    pass


class OutOfDomain(SmoothingError):
    pass


class OutOfRange(SmoothingError):
    pass


class InvalidBounds(SmoothingError):
    pass


class BelowHalf(SmoothingError):
    pass


class ZeroWeight(SmoothingError):
    pass


class ConfigError(SmoothingError):
    pass


class DivergenceDetected(SmoothingError):
    pass


class EmptyReport(SmoothingError):
    pass


class MismatchedTestSets(SmoothingError):
    pass


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Return a read-only 1-D float64 copy, rejecting empty or non-finite input."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size < 1:
        raise DimensionMismatch(f"{name} must have dim >= 1")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntry(f"{name} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


def check_label(label: int, num_classes: int) -> int:
    if num_classes < 2:
        raise OutOfRange("num_classes must be >= 2")
    label = int(label)
    if not 0 <= label < num_classes:
        raise OutOfRange(f"label {label} outside [0, {num_classes})")
    return label


def clamp_prob(p: float) -> float:
    return min(max(float(p), PROB_CLAMP), 1.0 - PROB_CLAMP)


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"


class Norm(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"


class Status(str, enum.Enum):
    CERTIFIED = "CERTIFIED"
    ABSTAIN = "ABSTAIN"


@dataclass(frozen=True)
class NoiseSpec:
    """Per-dimension noise: Gaussian (scale = std devs) or Laplace (scale = diversity)."""

    family: Family
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        mean = as_vector(self.mean, "mean")
        scale = as_vector(self.scale, "scale")
        if mean.shape != scale.shape:
            raise DimensionMismatch(f"mean dim {mean.size} != scale dim {scale.size}")
        if np.any(scale <= 0):
            raise NonPositiveScale("every scale entry must be > 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def isotropic(cls, sigma: float, dim: int, family=Family.GAUSSIAN) -> "NoiseSpec":
        return cls(family, np.zeros(dim), np.full(dim, float(sigma)))

    @property
    def dim(self) -> int:
        return self.mean.size

    def min_scale(self) -> float:
        return float(self.scale.min())

    @property
    def norm(self) -> Norm:
        return Norm.L2 if self.family is Family.GAUSSIAN else Norm.L1


def validate_noise_spec(spec: NoiseSpec, input_dim: int) -> None:
    # NoiseSpec validates itself on construction; re-check in case arrays were swapped in.
    if spec.mean.size != input_dim or spec.scale.size != input_dim:
        raise DimensionMismatch(f"noise dim {spec.mean.size} != input dim {input_dim}")
    if not (np.all(np.isfinite(spec.mean)) and np.all(np.isfinite(spec.scale))):
        raise NonFiniteEntry("noise spec contains NaN or Inf")
    if np.any(spec.scale <= 0):
        raise NonPositiveScale("every scale entry must be > 0")


@dataclass(frozen=True)
class CertifyConfig:
    n0: int = 100
    n: int = 100_000
    confidence_alpha: float = 0.001
    batch_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n0 < 1 or self.n < 1 or self.batch_size < 1:
            raise ConfigError("n0, n and batch_size must be positive")
        if self.n < self.n0:
            raise ConfigError(f"n ({self.n}) must be >= n0 ({self.n0})")
        if not 0.0 < self.confidence_alpha < 1.0:
            raise ConfigError("confidence_alpha must lie in (0, 1)")
        if not 0 <= self.seed <= UINT64_MAX:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class CertifyOutcome:
    status: Status
    norm: Norm
    label: Optional[int] = None
    radius: Optional[float] = None
    pa_lower: Optional[float] = None

    @classmethod
    def abstain(cls, norm: Norm) -> "CertifyOutcome":
        return cls(Status.ABSTAIN, norm)

    @property
    def certified(self) -> bool:
        return self.status is Status.CERTIFIED


@dataclass(frozen=True)
class RandomStream:
    """Counter-based stream: draw ``i`` depends only on (seed, stream_id, i).

    Any partition of sample indices across workers therefore reproduces the
    same draws.
    """

    seed: int
    stream_id: int = 0
    backend: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= UINT64_MAX:
                raise OutOfRange(f"{name} must be a 64-bit unsigned integer")
            object.__setattr__(self, name, int(v))
        if self.backend is None:
            object.__setattr__(self, "backend", _backend.kernels)

    def _check(self, start: int, count: int, dim: int) -> None:
        if count < 0 or dim < 1 or start < 0:
            raise OutOfRange("count >= 0, dim >= 1 and start >= 0 required")
        if start + count > MAX_SAMPLE_INDEX:
            raise OutOfRange("sample index exceeds 2**32")

    def raw(self, count: int, nblocks: int = 1, start: int = 0) -> np.ndarray:
        self._check(start, count, 1)
        return self.backend.raw_blocks(self.seed, self.stream_id, start, count, nblocks)

    def uniforms(self, count: int, dim: int = 1, start: int = 0) -> np.ndarray:
        self._check(start, count, dim)
        return self.backend.uniforms(self.seed, self.stream_id, start, count, dim)

    def normals(self, count: int, dim: int = 1, start: int = 0) -> np.ndarray:
        self._check(start, count, dim)
        return self.backend.normals(self.seed, self.stream_id, start, count, dim)

    def laplaces(self, count: int, dim: int = 1, start: int = 0) -> np.ndarray:
        self._check(start, count, dim)
        return self.backend.laplaces(self.seed, self.stream_id, start, count, dim)

    def base_draws(self, family: Family, count: int, dim: int, start: int = 0) -> np.ndarray:
        if Family(family) is Family.GAUSSIAN:
            return self.normals(count, dim, start)
        return self.laplaces(count, dim, start)


def rng_stream(seed: int, stream_id: int = 0) -> RandomStream:
    return RandomStream(seed, stream_id)


def chunk_ranges(start: int, count: int, chunk: int) -> list[tuple[int, int]]:
    """Fixed partition of [start, start+count) into chunks of ``chunk`` indices."""
    return [(s, min(chunk, start + count - s)) for s in range(start, start + count, chunk)]


def map_chunks(fn: Callable[[int, int], object], start: int, count: int, chunk: int,
               workers: int = 1) -> list:
    """Apply ``fn(chunk_start, chunk_count)`` over a fixed partition, results in order.

    The partition does not depend on ``workers``, so results are identical
    for any worker count.
    """
    ranges = chunk_ranges(start, count, chunk)
    if workers <= 1 or len(ranges) <= 1:
        return [fn(s, c) for s, c in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda sc: fn(*sc), ranges))


def finite_or_raise(x: float, what: str = "value") -> float:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteInput(f"{what} must be finite")
    return x


def stable_argmax(values: Sequence[float]) -> int:
    """argmax with ties broken toward the lowest index."""
    return int(np.argmax(np.asarray(values)))
