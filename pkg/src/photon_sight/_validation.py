"""Small argument checks shared by the simulators and estimators."""

import numbers

import numpy as np


def check_probability(value, name, *, open_low=False, open_high=False):
    """Return ``value`` as float, raising ValueError if it is not a probability."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    low_ok = value > 0.0 if open_low else value >= 0.0
    high_ok = value < 1.0 if open_high else value <= 1.0
    if not (low_ok and high_ok) or np.isnan(value):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise ValueError(f"{name} must be in {lo}0,1{hi}, got {value!r}")
    return value


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not value >= 0.0 or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number >= 0, got {value!r}")
    return value


def check_positive(value, name):
    value = check_nonnegative(value, name)
    if value == 0.0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return value


def check_count(value, name, *, minimum=0):
    """Integer check that accepts numpy integers but rejects bools and floats."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value
