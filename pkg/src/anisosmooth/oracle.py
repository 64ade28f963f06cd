"""Analytic ground truth for the Gaussian and Laplace radius guarantees.

The worst-case classifier for anisotropic Gaussian smoothing is a half-space
whose normal is ``delta / sigma**2``. Its smoothed probabilities have closed
forms, so soundness and tightness of a radius can be checked without Monte
Carlo error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certify import BaseClassifier
from .core import (
    DimensionMismatch,
    Family,
    InvalidBounds,
    NoiseSpec,
    OutOfDomain,
    ZeroWeight,
    as_vector,
    clamp_prob,
    validate_noise_spec,
)
from .noise import std_normal_cdf, std_normal_quantile
from .radius import ProbabilityBounds, radius_aniso_laplace, radius_binary_gaussian

DIRECTION_SEED = 20240607
NUM_DIRECTIONS = 64


class LinearClassifier(BaseClassifier):
    """Two-class half-space: label 1 iff ``w . z >= b``."""

    num_classes = 2

    def __init__(self, weight, bias: float):
        self.weight = as_vector(weight, "weight")
        if not np.any(self.weight != 0):
            raise ZeroWeight("weight must have a nonzero entry")
        self.bias = float(bias)
        self.input_dim = self.weight.size

    def margin(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weight - self.bias

    def evaluate_batch(self, X):
        return (self.margin(X) >= 0).astype(np.int64)


def smoothed_prob_linear(f: LinearClassifier, x, spec: NoiseSpec) -> float:
    """Exact P(f(x + eps) = 1) for Gaussian eps ~ N(mean, diag(scale^2))."""
    if not isinstance(f, LinearClassifier):
        raise ZeroWeight("expected a LinearClassifier")
    x = as_vector(x, "x")
    validate_noise_spec(spec, x.size)
    if spec.family is not Family.GAUSSIAN:
        raise OutOfDomain("closed form exists for Gaussian noise only")
    spread = math.sqrt(float(np.sum((f.weight * spec.scale) ** 2)))
    center = float(f.weight @ (x + spec.mean)) - f.bias
    return std_normal_cdf(center / spread)


def _check_pa(pa: float) -> float:
    pa = float(pa)
    if not 0.0 < pa < 1.0:
        raise OutOfDomain(f"pa must lie in (0, 1), got {pa}")
    return pa


def _check_scale(scale) -> np.ndarray:
    scale = as_vector(scale, "scale")
    if np.any(scale <= 0):
        raise OutOfDomain("scale entries must be > 0")
    return scale


def whitened_shift(delta, scale) -> float:
    """sqrt(sum delta_i^2 / sigma_i^2)."""
    return float(np.sqrt(np.sum((np.asarray(delta, dtype=np.float64) / scale) ** 2)))


def shifted_halfspace_prob(pa: float, delta, scale) -> float:
    """P(Y in A) = Phi(Phi^-1(pa) - ||delta / sigma||) for the half-space calibrated to pa."""
    pa = _check_pa(pa)
    scale = _check_scale(scale)
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != scale.shape:
        raise DimensionMismatch("delta and scale dims differ")
    return std_normal_cdf(std_normal_quantile(clamp_prob(pa)) - whitened_shift(delta, scale))


def shifted_halfspace_prob_b(pb: float, delta, scale) -> float:
    """P(Y in B) = Phi(Phi^-1(pb) + ||delta / sigma||) for the runner-up half-space."""
    pb = _check_pa(pb)
    scale = _check_scale(scale)
    return std_normal_cdf(std_normal_quantile(clamp_prob(pb)) + whitened_shift(delta, scale))


@dataclass(frozen=True)
class HalfSpaceOracle:
    """Worst-case set A = {z : sum_i delta_i/sigma_i^2 (z_i - mu_i - x_i) <= threshold}.

    ``threshold`` is ||delta/sigma|| * Phi^-1(pa), which makes P(X in A) = pa
    for X ~ N(x + mu, Sigma).
    """

    base_point: np.ndarray
    spec: NoiseSpec
    pa: float
    direction: np.ndarray
    threshold: float

    @classmethod
    def build(cls, base_point, spec: NoiseSpec, pa: float, direction) -> "HalfSpaceOracle":
        pa = _check_pa(pa)
        if spec.family is not Family.GAUSSIAN:
            raise OutOfDomain("half-space oracle needs Gaussian noise")
        x = as_vector(base_point, "base_point")
        validate_noise_spec(spec, x.size)
        d = as_vector(direction, "direction")
        if d.shape != x.shape:
            raise DimensionMismatch("direction and base point dims differ")
        if not np.any(d != 0):
            raise ZeroWeight("direction must be nonzero")
        t = whitened_shift(d, spec.scale) * std_normal_quantile(clamp_prob(pa))
        return cls(x, spec, pa, d, t)

    @property
    def normal(self) -> np.ndarray:
        return self.direction / self.spec.scale**2

    def contains(self, Z) -> np.ndarray:
        centered = np.asarray(Z, dtype=np.float64) - self.spec.mean - self.base_point
        return centered @ self.normal <= self.threshold

    def prob_at(self, shift) -> float:
        """P(x + shift + eps in A) in closed form."""
        shift = np.asarray(shift, dtype=np.float64)
        spread = whitened_shift(self.direction, self.spec.scale)
        return std_normal_cdf((self.threshold - float(self.normal @ shift)) / spread)

    def as_classifier(self) -> LinearClassifier:
        """Label 1 exactly on A (boundary included)."""
        w = -self.normal
        b = -(float(self.normal @ (self.base_point + self.spec.mean)) + self.threshold)
        return LinearClassifier(w, b)

    def likelihood_ratio_constants(self) -> tuple[float, float, float]:
        """(c, beta, t): A = {z : normal . z <= beta} = {z : f_Y(z)/f_X(z) <= t}.

        Here Y is X shifted by ``direction``; beta = log t + c.
        """
        loc = self.base_point + self.spec.mean
        d, s2 = self.direction, self.spec.scale**2
        c = float(np.sum((2.0 * loc * d + d * d) / (2.0 * s2)))
        beta = float(self.normal @ loc) + self.threshold
        return c, beta, math.exp(beta - c)

    def log_likelihood_ratio(self, Z) -> np.ndarray:
        """log f_Y(z) - log f_X(z) evaluated directly from the two densities."""
        Z = np.asarray(Z, dtype=np.float64)
        loc = self.base_point + self.spec.mean
        s2 = self.spec.scale**2
        lx = -np.sum((Z - loc) ** 2 / (2 * s2), axis=-1)
        ly = -np.sum((Z - loc - self.direction) ** 2 / (2 * s2), axis=-1)
        return ly - lx


def unit_directions(dim: int, count: int = NUM_DIRECTIONS, seed: int = DIRECTION_SEED,
                    ord: int = 2) -> np.ndarray:
    """Quasi-uniform unit vectors (normalised Gaussian draws) in the given norm."""
    g = np.random.default_rng(seed).standard_normal((count, dim))
    norms = np.linalg.norm(g, ord=ord, axis=1, keepdims=True)
    return g / norms


def worst_case_flip_check(pa: float, scale, margin: float, directions: int = NUM_DIRECTIONS,
                          seed: int = DIRECTION_SEED) -> bool:
    """Soundness inside R(1 - margin) and a flip just past R(1 + margin) on the min-sigma axis."""
    pa = _check_pa(pa)
    if not pa > 0.5:
        raise OutOfDomain("pa must exceed 1/2")
    if not margin > 0:
        raise OutOfDomain("margin must be > 0")
    scale = _check_scale(scale)
    R = radius_binary_gaussian(scale, pa)

    inside = R * (1.0 - margin) * unit_directions(scale.size, directions, seed)
    sound = all(shifted_halfspace_prob(pa, d, scale) > 0.5 for d in inside)

    axis = np.zeros(scale.size)
    axis[int(np.argmin(scale))] = R * (1.0 + margin)
    tight = shifted_halfspace_prob(pa, axis, scale) <= 0.5
    return bool(sound and tight)


def laplace_statistic(z, delta, scale) -> float:
    """T(z) = sum_i (|z_i - delta_i| - |z_i|) / lambda_i."""
    z = np.asarray(z, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    if not (z.shape == delta.shape == scale.shape):
        raise DimensionMismatch("z, delta and scale dims differ")
    return float(np.sum((np.abs(z - delta) - np.abs(z)) / scale))


def laplace_statistic_bound(delta, scale) -> float:
    return float(np.sum(np.abs(np.asarray(delta, dtype=np.float64)) / np.asarray(scale, dtype=np.float64)))


def laplace_guarantees(pa: float, pb: float, delta, scale) -> tuple[float, float]:
    """(lower bound on P(f(Y)=c_A), upper bound on P(f(Y)=c_B)) after shifting by delta.

    The lower bound is the better of the direct likelihood-ratio bound and the
    bound on the complement of A.
    """
    s = laplace_statistic_bound(delta, scale)
    lower_a = max(math.exp(-s) * pa, 1.0 - math.exp(s) * (1.0 - pa))
    upper_b = math.exp(s) * pb
    return lower_a, upper_b


def laplace_soundness_check(pa: float, pb: float, scale, directions: int = NUM_DIRECTIONS,
                            seed: int = DIRECTION_SEED, margin: float = 1e-6) -> bool:
    """Check the guaranteed class-A lower bound beats the class-B upper bound inside R."""
    try:
        b = ProbabilityBounds(pa, pb)
    except Exception as exc:
        raise InvalidBounds(str(exc)) from exc
    scale = _check_scale(scale)
    R = radius_aniso_laplace(scale, b)
    if R == 0.0:
        return True
    dim = scale.size
    dirs = list(unit_directions(dim, max(directions - dim, 0), seed, ord=1)) + list(np.eye(dim))
    dirs = dirs[:max(directions, dim)]
    for u in dirs:
        lower_a, upper_b = laplace_guarantees(b.pa_lower, b.pb_upper, R * (1.0 - margin) * u, scale)
        if not lower_a > upper_b:
            return False
    return True
