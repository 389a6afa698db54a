"""Input validation helpers shared by the numerical modules."""

import numpy as np

from .exceptions import (
    AlphaOutOfRangeError,
    ConfigError,
    DimensionMismatchError,
    NonFiniteInputError,
)


def as_matrix(M, name="M", allow_empty=False):
    """Return ``M`` as a finite 2-D float64 array (vectors become columns)."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {A.shape}")
    if not allow_empty and (A.shape[0] < 1 or A.shape[1] < 1):
        raise DimensionMismatchError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(A)):
        raise NonFiniteInputError(f"{name} contains NaN or Inf")
    return A


def as_vector(v, name="y"):
    a = np.asarray(v, dtype=np.float64)
    if a.ndim == 2 and 1 in a.shape:
        a = a.ravel()
    if a.ndim != 1 or a.size < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInputError(f"{name} contains NaN or Inf")
    return a


def check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRangeError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def check_nonnegative(value, name):
    value = float(value)
    if not value >= 0.0 or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite non-negative number, got {value}")
    return value


def check_positive_int(value, name):
    if int(value) != value or int(value) < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value}")
    return int(value)


def check_rows(m, D, name="D"):
    if D.shape[0] != m:
        raise DimensionMismatchError(
            f"{name} has {D.shape[0]} rows but the signal has dimension {m}"
        )
