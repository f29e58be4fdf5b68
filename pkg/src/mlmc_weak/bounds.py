"""Closed-form mean-square sampling-error bounds for weak-error estimators.

All bounds take the true bias |E[Y - Y_n]| and true variances as inputs.
Each returns a :class:`BoundPair` with ``lower = -b + sqrt(b^2 + S)`` and
``upper = sqrt(S)`` where ``S`` is the variance of the underlying estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .estimators import LevelSchedule


@dataclass(frozen=True)
class BoundPair:
    lower: float
    upper: float

    def contains(self, x: float, widen: float = 0.0) -> bool:
        return self.lower * (1 - widen) <= x <= self.upper * (1 + widen)


def _nonneg(**kw):
    for name, v in kw.items():
        if v < 0 or math.isnan(v):
            raise ValueError(f"{name} must be non-negative, got {v}")


def _pair(bias: float, s: float) -> BoundPair:
    upper = math.sqrt(s)
    if bias == 0:
        return BoundPair(upper, upper)
    # -b + sqrt(b^2 + s) rewritten to avoid cancellation when s << b^2
    lower = s / (bias + math.sqrt(bias * bias + s)) if s > 0 else 0.0
    return BoundPair(min(lower, upper), upper)


def lln_rms(variance: float, n: int) -> float:
    """Exact root-mean-square error of a plain n-sample Monte Carlo mean."""
    _nonneg(variance=variance)
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(variance / n)


def type1_bounds(bias: float, var_yn: float, n: int) -> BoundPair:
    """Bounds for estimating |E[Y - Y_n]| by |E[Y] - E_N[Y_n]|."""
    _nonneg(bias=bias, var_yn=var_yn)
    if n < 1:
        raise ValueError("n must be >= 1")
    return _pair(bias, var_yn / n)


def type2_bounds(bias: float, var_diff: float, n: int) -> BoundPair:
    """Bounds for estimating |E[Y - Y_n]| by |E_N[Y - Y_n]|."""
    _nonneg(bias=bias, var_diff=var_diff)
    if n < 1:
        raise ValueError("n must be >= 1")
    return _pair(bias, var_diff / n)


def _mlmc_sum(first_var: float, level_vars: Sequence[float], schedule) -> float:
    counts = schedule.counts if isinstance(schedule, LevelSchedule) else tuple(schedule)
    if len(counts) != len(level_vars) + 1:
        raise ValueError(f"schedule has {len(counts)} levels but {len(level_vars)} level variances were given")
    if min(counts) < 1:
        raise ValueError("schedule counts must be >= 1")
    _nonneg(first_var=first_var)
    for v in level_vars:
        _nonneg(level_var=v)
    return first_var / counts[0] + sum(v / n for v, n in zip(level_vars, counts[1:]))


def mlmc_type1_bounds(bias: float, var_y0: float, level_vars: Sequence[float],
                      schedule: LevelSchedule) -> BoundPair:
    _nonneg(bias=bias)
    return _pair(bias, _mlmc_sum(var_y0, level_vars, schedule))


def mlmc_type2_bounds(bias: float, var_y_minus_y0: float, level_vars: Sequence[float],
                      schedule: LevelSchedule) -> BoundPair:
    _nonneg(bias=bias)
    return _pair(bias, _mlmc_sum(var_y_minus_y0, level_vars, schedule))


def corollary_constants(var_y0: float, eps: float) -> tuple[float, float]:
    """(c_low, c_high) such that c_low*bias <= RMS sampling error <= c_high*bias
    under the bias-driven multilevel schedule."""
    _nonneg(var_y0=var_y0)
    if not eps > 0:
        raise ValueError("eps must be positive")
    c_low = math.sqrt((3 + var_y0) / 2) - 1
    c_high = math.sqrt(var_y0 + riemann_zeta(1 + eps))
    return c_low, c_high


# Bernoulli numbers B_2, B_4, B_6, B_8 for the Euler-Maclaurin tail
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30)


def riemann_zeta(s: float) -> float:
    """Riemann zeta for real s > 1.

    Partial sum up to M-1 plus the Euler-Maclaurin tail
    M^(1-s)/(s-1) + M^(-s)/2 + sum_k B_2k/(2k)! s(s+1)..(s+2k-2) M^(-s-2k+1).
    With M = 64 the truncation error is below 1e-13 relative for all s > 1.
    """
    if not s > 1:
        raise ValueError("zeta diverges for s <= 1")
    m = 64
    partial = float(np.sum(np.arange(m - 1, 0, -1, dtype=float) ** -s))
    tail = m ** (1 - s) / (s - 1) + 0.5 * m ** -s
    rising = s
    for k, b in enumerate(_BERNOULLI, start=1):
        tail += b / math.factorial(2 * k) * rising * m ** (-s - 2 * k + 1)
        rising *= (s + 2 * k - 1) * (s + 2 * k)
    return partial + tail
