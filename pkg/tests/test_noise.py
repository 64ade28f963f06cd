import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from anisosmooth import NoiseSpec, rng_stream, sample, sample_batch, std_normal_cdf, std_normal_quantile
from anisosmooth.core import DimensionMismatch, Family, NonFiniteInput, OutOfDomain

from oracles import bisect_quantile, mp_cdf, mp_quantile

PHI_1 = 0.8413447460685429


def test_cdf_examples():
    assert std_normal_cdf(0.0) == 0.5
    assert abs(std_normal_cdf(1.0) - PHI_1) <= 1e-14
    assert abs(std_normal_cdf(-1.0) - (1 - PHI_1)) <= 1e-14


@pytest.mark.parametrize("z", [-37.5, -20.0, -8.0, -3.3, -1e-3, 0.7, 2.5, 6.0, 9.0, 30.0])
def test_cdf_against_mpmath(z):
    assert abs(std_normal_cdf(z) - mp_cdf(z)) <= 1e-14


def test_cdf_vectorised_matches_scalar():
    z = np.linspace(-10, 10, 101)
    vec = std_normal_cdf(z)
    assert np.all(np.abs(vec - np.array([mp_cdf(v) for v in z])) <= 1e-14)


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
def test_cdf_rejects_non_finite(bad):
    with pytest.raises(NonFiniteInput):
        std_normal_cdf(bad)


@given(st.floats(-40, 40), st.floats(-40, 40))
def test_cdf_monotone(a, b):
    lo, hi = sorted((a, b))
    assert std_normal_cdf(lo) <= std_normal_cdf(hi)


def test_quantile_examples():
    assert std_normal_quantile(0.5) == 0.0
    assert abs(std_normal_quantile(PHI_1) - 1.0) <= 1e-10
    assert abs(std_normal_quantile(0.999) - 3.090232306167813) <= 1e-9


@pytest.mark.parametrize("p", [PHI_1, 0.999, 0.01, 0.3])
def test_quantile_against_bisection(p):
    assert abs(std_normal_quantile(p) - bisect_quantile(p, mp_cdf)) <= 1e-10
    assert abs(std_normal_quantile(p) - mp_quantile(p)) <= 1e-14


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_quantile_domain(p):
    with pytest.raises(OutOfDomain):
        std_normal_quantile(p)


def test_round_trip_dense_grid():
    p = np.linspace(0.001, 0.999, 20001)
    assert np.max(np.abs(std_normal_cdf(std_normal_quantile(p)) - p)) <= 1e-12


@given(st.floats(1e-12, 1 - 1e-12), st.floats(1e-12, 1 - 1e-12))
def test_quantile_strictly_increasing(a, b):
    if a == b:
        return
    lo, hi = sorted((a, b))
    qlo, qhi = std_normal_quantile(lo), std_normal_quantile(hi)
    assert qlo <= qhi
    # adjacent doubles deep in a tail can map to the same quantile double
    if hi - lo > 1e-9 * min(lo, 1 - lo, hi, 1 - hi):
        assert qlo < qhi


N = 10**6


def test_gaussian_moments():
    x = sample_batch(NoiseSpec.isotropic(1.0, 3), rng_stream(11, 0), N)
    assert np.all(np.abs(x.mean(axis=0)) <= 0.01)
    assert np.all(np.abs(x.std(axis=0) - 1.0) <= 0.01)


def test_laplace_variance():
    x = sample_batch(NoiseSpec.isotropic(1.0, 2, Family.LAPLACE), rng_stream(12, 0), N)
    assert np.all(np.abs(x.var(axis=0) - 2.0) <= 0.05)


def test_shifted_anisotropic_means():
    spec = NoiseSpec(Family.GAUSSIAN, [3.0, -3.0], [1.0, 2.0])
    x = sample_batch(spec, rng_stream(13, 0), N)
    se = np.array([1.0, 2.0]) / math.sqrt(N)
    assert np.all(np.abs(x.mean(axis=0) - [3.0, -3.0]) <= 5 * se)
    assert np.all(np.abs(x.std(axis=0) - [1.0, 2.0]) <= 0.02)


def test_covariance_diagonal():
    spec = NoiseSpec(Family.GAUSSIAN, [0.0, 1.0, -2.0, 0.5], [0.1, 1.0, 3.0, 7.0])
    x = sample_batch(spec, rng_stream(14, 0), 200000)
    r = np.corrcoef(x, rowvar=False)
    off = r[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) < 5 / math.sqrt(x.shape[0]))


def test_laplace_ks():
    spec = NoiseSpec(Family.LAPLACE, [0.5], [2.0])
    x = sample_batch(spec, rng_stream(15, 0), 10**5)[:, 0]
    # inverse-CDF oracle: scipy's Laplace(loc, scale) has density exp(-|z-loc|/scale)/(2 scale)
    res = stats.kstest(x, stats.laplace(loc=0.5, scale=2.0).cdf)
    assert res.statistic < 1.95 / math.sqrt(x.size)


def test_sample_single_draw_matches_batch():
    spec = NoiseSpec(Family.GAUSSIAN, [0.0, 1.0], [1.0, 0.5])
    s = rng_stream(3, 9)
    assert np.array_equal(sample(spec, s, index=7), sample_batch(spec, s, 10)[7])


def test_sample_dimension_check():
    with pytest.raises(DimensionMismatch):
        sample(NoiseSpec.isotropic(1.0, 3), rng_stream(0, 0), input_dim=4)
