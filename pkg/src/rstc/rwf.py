"""Reverse water-filling over an eigenvalue spectrum.

Rates are in bits per complex dimension. ``total_rate`` is averaged over all
``N`` modes, ``per_mode_rate`` is not.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import as_spectrum
from .errors import ConvergenceError, DegenerateSourceError, ValidationError

ZERO_REL = 1e-15     # eigenvalues below ZERO_REL * lam[0] are treated as zero
RATE_TOL = 1e-12     # bisection target: |sum of rates - N*R| <= RATE_TOL * N
TIE_TOL = 1e-12      # per-mode rates at or below this are a tie with the water level
_MAX_ITER = 400


@dataclass(frozen=True, eq=False)
class BitAllocation:
    spectrum: np.ndarray
    water_level: float
    per_mode_rate: np.ndarray
    active_set: np.ndarray
    total_rate: float

    @property
    def n(self):
        return self.spectrum.size

    @property
    def distortion(self):
        return float(np.mean(np.minimum(self.spectrum, self.water_level)))


def _clean(lam):
    lam = as_spectrum(lam)
    if lam[0] <= 0:
        raise DegenerateSourceError("spectrum is identically zero")
    return np.where(lam < ZERO_REL * lam[0], 0.0, lam)


def _check_rate(rq):
    if not np.isfinite(rq) or rq < 0:
        raise ValidationError(f"rate must be finite and >= 0, got {rq!r}")
    return float(rq)


def rate_at_level(lam, mu):
    """Average rate ``(1/N) sum max(0, log2(lam/mu))`` spent at water level ``mu``."""
    lam = _clean(lam)
    if mu <= 0:
        return math.inf
    pos = lam > mu
    return float(np.sum(np.log2(lam[pos] / mu)) / lam.size)


def water_level(lam, rq):
    """Solve the water level for average rate ``rq`` by bisection.

    The search runs on ``log2(mu)`` over ``[log2(lam[0]) - N*rq, log2(lam[0])]``,
    where the lower end always over-spends the budget.
    """
    lam = _clean(lam)
    rq = _check_rate(rq)
    n = lam.size
    target = n * rq
    logl = np.log2(lam[lam > 0])

    if rq == 0.0:
        t = logl[0]
    else:
        def excess(t):
            return float(np.sum(np.maximum(0.0, logl - t))) - target

        lo, hi = logl[0] - target, logl[0]
        for _ in range(_MAX_ITER):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if excess(mid) > 0:
                lo = mid
            else:
                hi = mid
        t = lo if abs(excess(lo)) < abs(excess(hi)) else hi
        if abs(excess(t)) > RATE_TOL * n:
            raise ConvergenceError(
                f"water level bisection stalled (residual {excess(t):.3e} bits)"
            )

    mu = min(float(lam[0]), float(2.0**t))
    rates = np.zeros(n)
    pos = lam > 0
    rates[pos] = np.maximum(0.0, np.log2(lam[pos]) - t)
    rates[rates <= TIE_TOL] = 0.0
    active = np.flatnonzero(rates > 0)
    if active.size == 0:
        mu = float(lam[0])      # canonical level for an empty active set
    return BitAllocation(lam, mu, rates, active, float(np.sum(rates) / n))


def dq(lam, rq):
    """Coefficient distortion ``(1/N) sum min(lam, mu(rq))``."""
    return water_level(lam, rq).distortion


def mu_closed_form(lam, active, rq, n):
    """Water level for a fixed active set: geometric mean of the active
    eigenvalues times ``2**(-n*rq/K)``, evaluated in the log domain."""
    lam = np.asarray(lam, dtype=float)
    active = np.asarray(active, dtype=int).ravel()
    if active.size == 0:
        raise ValidationError("active set is empty")
    sel = lam[active]
    if np.any(sel <= 0):
        raise ValidationError("active set contains non-positive eigenvalues")
    k = active.size
    return float(2.0 ** (np.mean(np.log2(sel)) - n * rq / k))
