"""Closed-form certified radii for isotropic/anisotropic Gaussian and Laplace smoothing.

None of these take the noise mean: it only enters through the probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BelowHalf, InvalidBounds, NonPositiveScale, as_vector, clamp_prob
from .noise import std_normal_quantile


@dataclass(frozen=True)
class ProbabilityBounds:
    pa_lower: float
    pb_upper: float

    def __post_init__(self):
        pa, pb = float(self.pa_lower), float(self.pb_upper)
        if not (0.0 <= pb <= 1.0 and 0.0 <= pa <= 1.0):
            raise InvalidBounds(f"bounds must lie in [0, 1]: pa={pa}, pb={pb}")
        if pa < pb:
            raise InvalidBounds(f"pa_lower ({pa}) < pb_upper ({pb})")
        object.__setattr__(self, "pa_lower", pa)
        object.__setattr__(self, "pb_upper", pb)


def _bounds(bounds) -> ProbabilityBounds:
    if isinstance(bounds, ProbabilityBounds):
        return bounds
    return ProbabilityBounds(*bounds)


def _min_scale(scale) -> float:
    scale = as_vector(scale, "scale")
    if np.any(scale <= 0):
        raise NonPositiveScale("every scale entry must be > 0")
    return float(scale.min())


def _quantile_gap(b: ProbabilityBounds) -> float:
    if b.pa_lower == b.pb_upper:
        return 0.0
    return std_normal_quantile(clamp_prob(b.pa_lower)) - std_normal_quantile(clamp_prob(b.pb_upper))


def radius_iso_gaussian(sigma: float, bounds) -> float:
    """l2 radius sigma/2 * (Phi^-1(pa) - Phi^-1(pb))."""
    sigma = float(sigma)
    if not sigma > 0:
        raise NonPositiveScale("sigma must be > 0")
    return 0.5 * sigma * _quantile_gap(_bounds(bounds))


def radius_aniso_gaussian(scale, bounds) -> float:
    """l2 radius 1/2 * min(sigma_i) * (Phi^-1(pa) - Phi^-1(pb))."""
    return 0.5 * _min_scale(scale) * _quantile_gap(_bounds(bounds))


def radius_binary_gaussian(scale, pa_lower: float) -> float:
    """l2 radius min(sigma_i) * Phi^-1(pa) for the two-class case, pa >= 1/2."""
    pa = float(pa_lower)
    if not pa >= 0.5:
        raise BelowHalf(f"pa_lower {pa} < 1/2")
    if pa > 1.0:
        raise InvalidBounds("pa_lower > 1")
    m = _min_scale(scale)
    if pa == 0.5:
        return 0.0
    return m * std_normal_quantile(clamp_prob(pa))


def laplace_branches(scale, bounds) -> tuple[float, float]:
    """The two l1 radius candidates (likelihood-ratio branch, complement branch)."""
    b = _bounds(bounds)
    if not (b.pa_lower > 0.0 and b.pb_upper > 0.0):
        raise InvalidBounds("Laplace radius needs pa_lower > 0 and pb_upper > 0")
    m = _min_scale(scale)
    ratio = 0.5 * m * math.log(b.pa_lower / b.pb_upper)
    complement = -m * math.log1p(b.pb_upper - b.pa_lower)
    return ratio, complement


def radius_aniso_laplace(scale, bounds) -> float:
    """l1 radius: the larger of the two Laplace branches."""
    b = _bounds(bounds)
    if b.pa_lower == b.pb_upper:
        if not b.pa_lower > 0.0:
            raise InvalidBounds("Laplace radius needs pa_lower > 0 and pb_upper > 0")
        _min_scale(scale)
        return 0.0
    return max(laplace_branches(scale, b))
