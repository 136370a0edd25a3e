"""Reusable input checks with clear error messages."""

import math
from typing import Sequence

import numpy as np

from .errors import DomainError, UsageError


def validate_finite(values: Sequence[float] | np.ndarray, name: str = "values") -> np.ndarray:
    """Return values as a float64 array, rejecting NaN and infinities."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        bad = arr[~np.isfinite(arr)]
        raise DomainError(f"{name} must be finite. Got non-finite entries: {bad.tolist()[:5]}")
    return arr


def validate_finite_scalar(x: float, name: str = "x") -> float:
    """Reject a non-finite scalar."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite. Got {x}")
    return x


def validate_probability(p: float) -> float:
    """Validate 0 < p < 1 (endpoints map to infinite quantiles)."""
    p = float(p)
    if not math.isfinite(p) or p <= 0.0 or p >= 1.0:
        raise DomainError(
            f"Probability must lie in the open interval (0, 1). Got {p}. "
            "Use mid-rank probabilities (rank - 0.5) / N, which never reach 0 or 1."
        )
    return p


def validate_min_size(values: Sequence, minimum: int, what: str) -> None:
    """Validate that a sequence has at least `minimum` entries."""
    if len(values) < minimum:
        raise UsageError(
            f"{what} needs at least {minimum} entries. Got {len(values)}"
        )


def validate_same_length(a: Sequence, b: Sequence, what_a: str, what_b: str) -> None:
    """Validate that two sequences are aligned element-for-element."""
    if len(a) != len(b):
        raise UsageError(
            f"{what_a} and {what_b} must have the same length. Got {len(a)} and {len(b)}"
        )
