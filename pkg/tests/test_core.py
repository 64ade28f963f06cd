import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anisosmooth.core import (
    CertifyConfig,
    ConfigError,
    DimensionMismatch,
    Family,
    NoiseSpec,
    NonFiniteEntry,
    NonPositiveScale,
    OutOfRange,
    as_vector,
    check_label,
    chunk_ranges,
    map_chunks,
    rng_stream,
    validate_noise_spec,
)


def test_validate_noise_spec_ok():
    validate_noise_spec(NoiseSpec(Family.GAUSSIAN, np.zeros(3), [1, 1, 1]), 3)


def test_zero_scale_rejected():
    with pytest.raises(NonPositiveScale):
        NoiseSpec(Family.GAUSSIAN, np.zeros(3), [1, 0, 1])


def test_dimension_mismatch():
    spec = NoiseSpec(Family.GAUSSIAN, np.zeros(2), [1, 1])
    with pytest.raises(DimensionMismatch):
        validate_noise_spec(spec, 3)
    with pytest.raises(DimensionMismatch):
        NoiseSpec(Family.LAPLACE, np.zeros(2), [1, 1, 1])


def test_min_scale_and_norm():
    spec = NoiseSpec("laplace", [0, 0, 0], [0.3, 0.1, 2.0])
    assert spec.min_scale() == 0.1
    assert spec.norm.value == "L1"
    assert NoiseSpec.isotropic(0.5, 4).norm.value == "L2"


def test_spec_arrays_are_immutable():
    spec = NoiseSpec.isotropic(1.0, 3)
    with pytest.raises(ValueError):
        spec.scale[0] = -1.0


@given(st.lists(st.one_of(st.floats(allow_nan=True, allow_infinity=True)), min_size=1, max_size=8))
def test_vector_construction_rejects_non_finite(values):
    if all(math.isfinite(v) for v in values):
        assert np.all(np.isfinite(as_vector(values)))
    else:
        with pytest.raises(NonFiniteEntry):
            as_vector(values)


def test_nan_in_noise_spec():
    with pytest.raises(NonFiniteEntry):
        NoiseSpec(Family.GAUSSIAN, [0.0, float("nan")], [1.0, 1.0])
    with pytest.raises(NonFiniteEntry):
        NoiseSpec(Family.GAUSSIAN, [0.0, 0.0], [1.0, float("inf")])


def test_labels():
    assert check_label(1, 2) == 1
    with pytest.raises(OutOfRange):
        check_label(2, 2)
    with pytest.raises(OutOfRange):
        check_label(0, 1)


@pytest.mark.parametrize("kwargs", [
    dict(n0=10, n=5),
    dict(confidence_alpha=0.0),
    dict(confidence_alpha=1.0),
    dict(n0=0),
    dict(seed=-1),
])
def test_certify_config_validation(kwargs):
    with pytest.raises(ConfigError):
        CertifyConfig(**kwargs)


def test_stream_repeatable():
    a = rng_stream(1, 0).uniforms(1000)
    b = rng_stream(1, 0).uniforms(1000)
    assert a.tobytes() == b.tobytes()


def test_streams_differ():
    assert rng_stream(1, 0).uniforms(1)[0, 0] != rng_stream(1, 1).uniforms(1)[0, 0]
    assert rng_stream(1, 0).uniforms(1)[0, 0] != rng_stream(2, 0).uniforms(1)[0, 0]


def test_stream_offset_is_slice():
    s = rng_stream(9, 3)
    full = s.normals(50, 5)
    assert np.array_equal(full[20:35], s.normals(15, 5, start=20))


def test_worker_count_does_not_change_samples():
    s = rng_stream(1, 7)
    draw = lambda start, count: s.normals(count, 3, start)  # noqa: E731
    one = np.concatenate(map_chunks(draw, 0, 5000, 256, workers=1))
    eight = np.concatenate(map_chunks(draw, 0, 5000, 256, workers=8))
    assert one.tobytes() == eight.tobytes()
    assert np.array_equal(np.sort(one, axis=None), np.sort(eight, axis=None))


def test_chunk_ranges_cover():
    ranges = chunk_ranges(5, 23, 10)
    assert ranges == [(5, 10), (15, 10), (25, 3)]


def test_stream_bounds():
    with pytest.raises(OutOfRange):
        rng_stream(-1, 0)
    with pytest.raises(OutOfRange):
        rng_stream(0, 2**64)
    with pytest.raises(OutOfRange):
        rng_stream(0, 0).uniforms(2, start=2**32 - 1)
