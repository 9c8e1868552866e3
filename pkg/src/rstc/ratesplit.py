"""Splitting a feedback budget between coefficients and basis.

At fixed ``r_total`` the end-to-end model ``D(r0) = Dq(r_total - r0) + D0(r0)``
has derivative ``ln2 * (mu(r_total - r0) - beta0 * D0(r0))``. Both terms move
monotonically in ``r0`` (the water level rises as the coefficient rate falls,
``D0`` decays), so the residual is increasing, ``D`` is convex in ``r0`` and
the optimum is the unique root of the residual, or an end point.
"""

import math
import sys
from dataclasses import dataclass

import numpy as np

from .channel import as_spectrum
from .errors import ConvergenceError, ValidationError
from .mismatch import MismatchModel, d0_model, e2e_model
from .rwf import mu_closed_form, water_level

INACTIVE = "inactive"
ACTIVE = "active"
NEVER = sys.float_info.max  # threshold sentinel: basis feedback never pays off
_MAX_ITER = 300


@dataclass(frozen=True)
class RateSplit:
    r_total: float
    r_q: float
    r_0: float
    regime: str


@dataclass(frozen=True)
class PhaseThreshold:
    """Rate above which basis feedback lowers the end-to-end distortion.

    ``rate`` comes from bisection on the exact water level; ``closed_form``
    re-evaluates the fixed-active-set formula on the converged active set.
    ``rate == NEVER`` (with ``beneficial`` false) flags a model in which the
    basis never gets bits.
    """

    rate: float
    closed_form: float
    target_level: float
    active_set: tuple
    beneficial: bool = True


def _check_total(r_total):
    if not np.isfinite(r_total) or r_total < 0:
        raise ValidationError(f"r_total must be finite and >= 0, got {r_total!r}")
    return float(r_total)


_RATE_RES = 1e-15


def _bisect(f, lo, hi):
    """Root of an increasing function on ``[lo, hi]``.

    Stops at float resolution or once the bracket is narrower than
    ``_RATE_RES`` bits (roots near zero would otherwise bisect into subnormals).
    """
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= _RATE_RES * max(1.0, abs(hi)):
            return mid
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phase_threshold(lam, model: MismatchModel):
    lam = as_spectrum(lam)
    target = model.beta0 * d0_model(lam, model, 0.0) if model.p else 0.0
    if not target > 0:
        return PhaseThreshold(NEVER, NEVER, target, (), beneficial=False)
    if target >= lam[0]:
        return PhaseThreshold(0.0, 0.0, target, ())

    # mu(R) - target is decreasing in R; flip sign for the increasing-root helper
    def resid(r):
        return target - water_level(lam, r).water_level

    hi = 1.0
    while resid(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise ConvergenceError("could not bracket the phase threshold")
    r_th = _bisect(resid, 0.0, hi)
    alloc = water_level(lam, r_th)
    active = alloc.active_set
    if active.size == 0:
        # water level still at lam[0]: threshold is at the very first bit
        active = np.array([0])
    k = active.size
    geo = 2.0 ** np.mean(np.log2(lam[active]))
    closed = k / lam.size * math.log2(geo / target)
    return PhaseThreshold(r_th, closed, target, tuple(int(i) for i in active))


def _split_residual(lam, model, r_total):
    def g(r0):
        return water_level(lam, r_total - r0).water_level - model.beta0 * d0_model(lam, model, r0)
    return g


def optimal_split(lam, model: MismatchModel, r_total):
    """Distortion-minimizing ``(r_q, r_0)`` under the analytic model.

    Below the phase threshold everything goes to coefficients; above it the
    balance ``mu(r_q) = beta0 * D0(r_0)`` is solved by bisection on ``r_0``
    with the exact (piecewise) water level.
    """
    lam = as_spectrum(lam)
    r_total = _check_total(r_total)
    if model.p == 0 or r_total == 0.0:
        return RateSplit(r_total, r_total, 0.0, INACTIVE)
    th = phase_threshold(lam, model)
    if r_total <= th.rate:
        return RateSplit(r_total, r_total, 0.0, INACTIVE)
    g = _split_residual(lam, model, r_total)
    if g(0.0) >= 0:
        return RateSplit(r_total, r_total, 0.0, INACTIVE)
    if g(r_total) <= 0:
        return RateSplit(r_total, 0.0, r_total, ACTIVE)
    r0 = _bisect(g, 0.0, r_total)
    if r0 <= 0.0:
        return RateSplit(r_total, r_total, 0.0, INACTIVE)
    return RateSplit(r_total, r_total - r0, r0, ACTIVE)


def split_distortion(lam, model, split: RateSplit):
    return e2e_model(lam, model, split.r_q, split.r_0)


def split_mu_closed_form(lam, split: RateSplit):
    """Fixed-active-set water level at ``split.r_q`` (cross-check for the bisection)."""
    lam = as_spectrum(lam)
    alloc = water_level(lam, split.r_q)
    if alloc.active_set.size == 0:
        return alloc.water_level
    return mu_closed_form(lam, alloc.active_set, split.r_q, lam.size)


@dataclass(frozen=True)
class SplitConsistency:
    r_total: float
    threshold: PhaseThreshold
    split: RateSplit
    consistent: bool


def split_consistency_check(lam, model, r_total, tol=1e-6):
    """Check that the split is inactive exactly when ``r_total <= R_th``.

    Within ``tol`` of the threshold either regime is accepted as long as
    ``r_0 <= tol``.
    """
    th = phase_threshold(lam, model)
    split = optimal_split(lam, model, r_total)
    if abs(r_total - th.rate) <= tol:
        ok = split.r_0 <= tol
    elif r_total < th.rate:
        ok = split.regime == INACTIVE and split.r_0 == 0.0
    else:
        ok = split.regime == ACTIVE and split.r_0 > 0.0
    return SplitConsistency(float(r_total), th, split, ok)


def effective_rate(r_total, b_update, n, tau):
    """Budget left after amortizing ``b_update`` bits over ``n * tau`` dimensions."""
    if b_update < 0:
        raise ValidationError(f"b_update must be >= 0, got {b_update!r}")
    if n <= 0 or tau <= 0:
        raise ValidationError("n and tau must be positive")
    return max(0.0, float(r_total) - float(b_update) / (n * tau))
