"""Gaussian special functions and anisotropic noise sampling."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from . import _backend
from .core import (
    NoiseSpec,
    NonFiniteInput,
    OutOfDomain,
    RandomStream,
    validate_noise_spec,
)

_SQRT1_2 = 1.0 / math.sqrt(2.0)


def std_normal_cdf(z):
    """Standard normal CDF. Scalars go through ``math.erfc``; arrays through ``ndtr``."""
    if np.ndim(z) == 0:
        z = float(z)
        if not math.isfinite(z):
            raise NonFiniteInput("std_normal_cdf needs a finite argument")
        return 0.5 * math.erfc(-z * _SQRT1_2)
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("std_normal_cdf needs finite arguments")
    return ndtr(z)


def std_normal_quantile(p):
    """Inverse standard normal CDF on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise OutOfDomain("quantile needs 0 < p < 1")
    out = _backend.kernels.ndtri(arr.reshape(-1)).reshape(arr.shape)
    if arr.ndim == 0:
        return float(out)
    return out


def sample_batch(spec: NoiseSpec, stream: RandomStream, count: int, start: int = 0) -> np.ndarray:
    """Draws for sample indices ``start .. start+count-1``, shape (count, dim)."""
    base = stream.base_draws(spec.family, count, spec.dim, start)
    return spec.mean + spec.scale * base


def sample(spec: NoiseSpec, stream: RandomStream, index: int = 0, input_dim: int | None = None) -> np.ndarray:
    """One draw: dimension i ~ N(mean_i, scale_i^2) or Laplace(mean_i, scale_i)."""
    if input_dim is not None:
        validate_noise_spec(spec, input_dim)
    return sample_batch(spec, stream, 1, index)[0]
