"""Input validation helpers shared by the estimators and functional API."""

import numbers

import numpy as np
from sympy import isprime


class InvalidInputError(ValueError):
    """Raised for inputs outside an operation's domain."""


class EmptyTableError(InvalidInputError):
    pass


class UndefinedDistributionError(InvalidInputError):
    """Raised when a conditional distribution has an empty population."""


class InsufficientDecayError(RuntimeError):
    """Raised when a characteristic function is too large near the cutoff
    to be inverted (the law likely carries large atoms)."""


class InfeasibleParametersError(RuntimeError):
    pass


def check_positive_int(value, name, minimum=1):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        if isinstance(value, numbers.Real) and float(value).is_integer():
            value = int(value)
        else:
            raise InvalidInputError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_real(value, name, low=None, high=None, low_open=False):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{name} must be real, got {value!r}") from None
    if not np.isfinite(value):
        raise InvalidInputError(f"{name} must be finite, got {value}")
    if low is not None and (value < low or (low_open and value == low)):
        raise InvalidInputError(f"{name} out of range: {value}")
    if high is not None and value > high:
        raise InvalidInputError(f"{name} out of range: {value}")
    return value


def check_prime(p):
    p = check_positive_int(p, "p", minimum=2)
    if not isprime(p):
        raise InvalidInputError(f"{p} is not prime")
    return p


def as_float_array(y):
    """Return ``(array, was_scalar)`` for a real scalar or array-like."""
    arr = np.asarray(y, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0
