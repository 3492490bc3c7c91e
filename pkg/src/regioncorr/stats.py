"""Sample moments and composite correlation functionals.

All variances and covariances use the 1/(T-1) divisor.  The divisor
cancels in every correlation ratio, but fixing it keeps the reported
values of the three-vector variance combination ``s_hat_squared``
unambiguous.
"""

from __future__ import annotations

import numpy as np


class DegenerateSeriesError(ValueError):
    """A correlation was requested for a series with zero sample variance."""


class UndefinedDifferenceCorrelationError(ValueError):
    """A difference-correlation denominator came out nonpositive.

    Callers that average over repeated draws treat this as a signal to
    discard the offending draw.
    """


def _as_series(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1 or a.size < 2:
        raise ValueError("series must be one-dimensional with length >= 2")
    return a


def _check_same_length(*series: np.ndarray) -> None:
    n = series[0].size
    if any(s.size != n for s in series):
        raise ValueError("series lengths differ")


def sample_cov(a, b) -> float:
    """Sample covariance with divisor T - 1."""
    a, b = _as_series(a), _as_series(b)
    _check_same_length(a, b)
    return float(np.dot(a - a.mean(), b - b.mean()) / (a.size - 1))


def sample_var(a) -> float:
    """Sample variance with divisor T - 1."""
    a = _as_series(a)
    ac = a - a.mean()
    return float(np.dot(ac, ac) / (a.size - 1))


def sample_sd(a) -> float:
    """Sample standard deviation with divisor T - 1."""
    return float(np.sqrt(sample_var(a)))


def sample_cor(a, b) -> float:
    """Sample correlation cov / (sd * sd).

    Raises
    ------
    DegenerateSeriesError
        If either series has zero sample variance.
    """
    a, b = _as_series(a), _as_series(b)
    _check_same_length(a, b)
    ac, bc = a - a.mean(), b - b.mean()
    va, vb = np.dot(ac, ac), np.dot(bc, bc)
    if va == 0.0 or vb == 0.0:
        raise DegenerateSeriesError("degenerate series")
    return float(np.dot(ac, bc) / np.sqrt(va * vb))


def s_hat_squared(u, v, w) -> float:
    """Variance of the common component of u against helpers v and w.

    Returns (var(u - v) + var(u - w) - var(v - w)) / 2, which estimates
    the variance of u minus its covariances with v and w plus the
    covariance of v and w.  May be negative in finite samples; callers
    decide what to do with nonpositive values.
    """
    u, v, w = _as_series(u), _as_series(v), _as_series(w)
    _check_same_length(u, v, w)
    return (sample_var(u - v) + sample_var(u - w) - sample_var(v - w)) / 2.0


def cor_tilde(y1, y2, y3, y4) -> float:
    """Difference-based correlation of y1 and y2 using helpers y3 and y4.

    Computes cov(y1 - y3, y2 - y4) / (s(y1, y3, y4) * s(y2, y3, y4))
    where s is the square root of ``s_hat_squared``.  Subtracting the
    helper series removes any additive term shared by all four inputs,
    which is what makes the ratio insensitive to a global noise.  The
    result is not clamped to [-1, 1].

    Raises
    ------
    UndefinedDifferenceCorrelationError
        If either ``s_hat_squared`` factor is nonpositive.
    """
    y1, y2, y3, y4 = (_as_series(y) for y in (y1, y2, y3, y4))
    _check_same_length(y1, y2, y3, y4)
    s1_sq = s_hat_squared(y1, y3, y4)
    s2_sq = s_hat_squared(y2, y3, y4)
    if s1_sq <= 0.0 or s2_sq <= 0.0:
        raise UndefinedDifferenceCorrelationError(
            "undefined difference-correlation")
    return sample_cov(y1 - y3, y2 - y4) / float(np.sqrt(s1_sq * s2_sq))
