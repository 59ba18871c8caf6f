"""Horizontal-error statistics for trajectory evaluation.

All errors are 2D (x-y) distances in meters.  The percentile rule is linear
interpolation between closest ranks: rank h = (n-1)*q on the sorted sample.
It is implemented once and shared by ce90 and the CDF readback so the two
can never disagree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Position


class EmptyErrors(ValueError):
    """Statistics requested over an empty error list."""


def _checked(errors) -> np.ndarray:
    arr = np.asarray(errors, dtype=float)
    if arr.size == 0:
        raise EmptyErrors("no errors")
    if (arr < 0).any() or not np.isfinite(arr).all():
        raise ValueError("errors must be finite and >= 0")
    return arr


def _quantile(sorted_values: np.ndarray, q: float) -> float:
    """Linear interpolation between closest ranks on pre-sorted data."""
    n = sorted_values.shape[0]
    h = (n - 1) * q
    lo = int(np.floor(h))
    if lo + 1 >= n:
        return float(sorted_values[-1])
    frac = h - lo
    return float(sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]))


def horizontal_error(estimate: Position, truth: Position) -> float:
    """2D distance between estimate and truth, ignoring height."""
    return float(np.hypot(estimate.x - truth.x, estimate.y - truth.y))


def mae(errors) -> float:
    """Arithmetic mean of the horizontal errors."""
    return float(_checked(errors).mean())


def ce90(errors) -> float:
    """90th percentile of the horizontal errors (closest-ranks interpolation)."""
    return _quantile(np.sort(_checked(errors)), 0.9)


def error_cdf(errors) -> list[tuple[float, float]]:
    """Empirical CDF as (error, fraction) rows, sorted, last fraction 1.0."""
    arr = np.sort(_checked(errors))
    n = arr.shape[0]
    return [(float(e), (i + 1) / n) for i, e in enumerate(arr)]


def quantile_from_cdf(cdf: list[tuple[float, float]], q: float) -> float:
    """Read a quantile back off an error_cdf table.

    Uses the same closest-ranks rule as ce90, so
    quantile_from_cdf(error_cdf(e), 0.9) == ce90(e) exactly.
    """
    if not cdf:
        raise EmptyErrors("empty cdf")
    values = np.array([row[0] for row in cdf])
    return _quantile(values, q)


@dataclass(frozen=True)
class ErrorReport:
    """Summary statistics of one evaluation run."""

    errors: tuple[float, ...]
    mae: float
    ce90: float
    cdf: tuple[tuple[float, float], ...]

    @classmethod
    def from_errors(cls, errors) -> "ErrorReport":
        arr = _checked(errors)
        return cls(
            errors=tuple(float(e) for e in arr),
            mae=mae(arr),
            ce90=ce90(arr),
            cdf=tuple(error_cdf(arr)),
        )

    @property
    def median(self) -> float:
        return _quantile(np.sort(np.asarray(self.errors)), 0.5)
