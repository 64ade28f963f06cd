"""Certified robustness for randomized smoothing with per-dimension noise."""
from ._backend import NAME as BACKEND
from .certify import (
    ABSTAIN,
    BaseClassifier,
    ConstantClassifier,
    FunctionClassifier,
    MonteCarloCounts,
    binom_p_value,
    certify,
    classify_samples,
    lower_conf_bound,
    predict,
)
from .core import (
    CertifyConfig,
    CertifyOutcome,
    Family,
    NoiseSpec,
    Norm,
    RandomStream,
    SmoothingError,
    Status,
    rng_stream,
    validate_noise_spec,
)
from .noise import sample, sample_batch, std_normal_cdf, std_normal_quantile
from .radius import (
    ProbabilityBounds,
    radius_aniso_gaussian,
    radius_aniso_laplace,
    radius_binary_gaussian,
    radius_iso_gaussian,
)

__all__ = [
    "ABSTAIN", "BACKEND", "BaseClassifier", "CertifyConfig", "CertifyOutcome", "ConstantClassifier",
    "Family", "FunctionClassifier", "MonteCarloCounts", "NoiseSpec", "Norm", "ProbabilityBounds",
    "RandomStream", "SmoothingError", "Status", "binom_p_value", "certify", "classify_samples",
    "lower_conf_bound", "predict", "radius_aniso_gaussian", "radius_aniso_laplace",
    "radius_binary_gaussian", "radius_iso_gaussian", "rng_stream", "sample", "sample_batch",
    "std_normal_cdf", "std_normal_quantile", "validate_noise_spec",
]
