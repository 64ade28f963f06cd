"""Smoothed-classifier prediction and certification by Monte Carlo sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import betainc
from scipy.stats import binom

from .core import (
    CertifyConfig,
    CertifyOutcome,
    Family,
    NoiseSpec,
    OutOfRange,
    RandomStream,
    Status,
    as_vector,
    clamp_prob,
    map_chunks,
    rng_stream,
    validate_noise_spec,
)
from .noise import sample_batch
from .radius import ProbabilityBounds, radius_aniso_laplace, radius_binary_gaussian

ABSTAIN = -1


class BaseClassifier:
    """Deterministic map from inputs to labels.

    Subclasses implement ``scores_batch`` (labels are its argmax, lowest index
    on ties) or override ``evaluate_batch`` directly.
    """

    num_classes: int
    input_dim: int

    def scores_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores_batch(X), axis=1)

    def evaluate(self, x) -> int:
        return int(self.evaluate_batch(np.asarray(x, dtype=np.float64)[None, :])[0])


class FunctionClassifier(BaseClassifier):
    """Wrap a batched callable returning either scores (2-D) or labels (1-D)."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], num_classes: int, input_dim: int):
        self.fn = fn
        self.num_classes = num_classes
        self.input_dim = input_dim

    def evaluate_batch(self, X):
        out = np.asarray(self.fn(X))
        if out.ndim == 2:
            return np.argmax(out, axis=1)
        return out.astype(np.int64)


class ConstantClassifier(BaseClassifier):
    def __init__(self, label: int, num_classes: int, input_dim: int):
        self.label = label
        self.num_classes = num_classes
        self.input_dim = input_dim

    def evaluate_batch(self, X):
        return np.full(len(X), self.label, dtype=np.int64)


@dataclass(frozen=True)
class MonteCarloCounts:
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if int(np.sum(self.counts)) != self.total:
            raise OutOfRange("counts do not sum to total")

    def top_two(self) -> tuple[int, int]:
        order = np.argsort(-self.counts, kind="stable")
        return int(order[0]), int(order[1])


def classify_samples(f: BaseClassifier, x, spec: NoiseSpec, num: int, stream: RandomStream,
                     start: int = 0, batch_size: int = 1000, workers: int = 1) -> MonteCarloCounts:
    """Tally f(x + eps) over sample indices ``start .. start+num-1``."""
    x = as_vector(x, "x")
    validate_noise_spec(spec, x.size)

    def tally(s, c):
        noisy = x + sample_batch(spec, stream, c, s)
        labels = f.evaluate_batch(noisy)
        return np.bincount(labels, minlength=f.num_classes)

    parts = map_chunks(tally, start, num, batch_size, workers)
    counts = np.sum(parts, axis=0).astype(np.int64) if parts else np.zeros(f.num_classes, np.int64)
    return MonteCarloCounts(counts, int(num))


def _check_kn(k: int, n: int) -> tuple[int, int]:
    k, n = int(k), int(n)
    if n < 1 or not 0 <= k <= n:
        raise OutOfRange(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")
    return k, n


def lower_conf_bound(k: int, n: int, confidence: float) -> float:
    """One-sided Clopper-Pearson lower bound at level ``confidence``.

    Bisects P(Bin(n, p) >= k) = I_p(k, n-k+1) = alpha for p.
    """
    k, n = _check_kn(k, n)
    if not 0.0 < confidence < 1.0:
        raise OutOfRange("confidence must lie in (0, 1)")
    if k == 0:
        return 0.0
    alpha = 1.0 - confidence
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if betainc(k, n - k + 1, mid) < alpha:
            lo = mid
        else:
            hi = mid
    return lo


def binom_p_value(k: int, n: int, p: float = 0.5) -> float:
    """Two-sided exact binomial test p-value (sum of outcomes no likelier than k)."""
    k, n = _check_kn(k, n)
    p = float(p)
    if not 0.0 < p < 1.0:
        raise OutOfRange("p must lie in (0, 1)")
    pmf = binom.pmf(np.arange(n + 1), n, p)
    # relative slack for outcomes tied with k up to rounding
    mask = pmf <= pmf[k] * (1.0 + 1e-7)
    return min(1.0, math.fsum(pmf[mask]))


def predict(f: BaseClassifier, x, spec: NoiseSpec, n: int, confidence_alpha: float,
            stream: RandomStream, batch_size: int = 1000, workers: int = 1) -> int:
    """Top class, or ``ABSTAIN`` when the top two counts are not separated at level alpha."""
    counts = classify_samples(f, x, spec, n, stream, 0, batch_size, workers)
    ca, cb = counts.top_two()
    na, nb = int(counts.counts[ca]), int(counts.counts[cb])
    if binom_p_value(na, na + nb, 0.5) <= confidence_alpha:
        return ca
    return ABSTAIN


def certify(f: BaseClassifier, x, spec: NoiseSpec, cfg: CertifyConfig,
            stream: Optional[RandomStream] = None, workers: int = 1) -> CertifyOutcome:
    """Select the top class on n0 draws, lower-bound its probability on n fresh draws.

    Selection uses sample indices [0, n0), estimation [n0, n0+n) of the same
    stream, so the two sets are independent.
    """
    if stream is None:
        stream = rng_stream(cfg.seed, 0)
    select = classify_samples(f, x, spec, cfg.n0, stream, 0, cfg.batch_size, workers)
    ca = select.top_two()[0]
    est = classify_samples(f, x, spec, cfg.n, stream, cfg.n0, cfg.batch_size, workers)
    pa = lower_conf_bound(int(est.counts[ca]), cfg.n, 1.0 - cfg.confidence_alpha)
    if not pa > 0.5:
        return CertifyOutcome.abstain(spec.norm)
    pa = min(pa, clamp_prob(pa))
    if spec.family is Family.GAUSSIAN:
        r = radius_binary_gaussian(spec.scale, pa)
    else:
        r = radius_aniso_laplace(spec.scale, ProbabilityBounds(pa, 1.0 - pa))
    if not r > 0:
        return CertifyOutcome.abstain(spec.norm)
    return CertifyOutcome(Status.CERTIFIED, spec.norm, ca, float(r), float(pa))

