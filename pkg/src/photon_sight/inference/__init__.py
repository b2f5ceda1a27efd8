"""Estimation and hypothesis testing for the simulated sessions."""

from .exact import (
    BinomialTestResult,
    bootstrap_ci,
    ch_violation_test,
    exact_binomial_test,
    mcnemar_exact,
    two_proportion_test,
    wilson_interval,
)
from .psychometric import (
    FoSPoint,
    HechtEstimator,
    PsychometricFit,
    UnidentifiableError,
    fit_hecht,
    hecht_log_likelihood,
)

__all__ = [
    "BinomialTestResult",
    "FoSPoint",
    "HechtEstimator",
    "PsychometricFit",
    "UnidentifiableError",
    "bootstrap_ci",
    "ch_violation_test",
    "exact_binomial_test",
    "fit_hecht",
    "hecht_log_likelihood",
    "mcnemar_exact",
    "two_proportion_test",
    "wilson_interval",
]
