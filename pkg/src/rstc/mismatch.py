"""End-to-end distortion under basis mismatch.

The decoder reconstructs ``ĥ = Û ĥ̃`` while the encoder decorrelated with
``U``. Per realization the error splits exactly into

* ``T1 = |h̃ - ĥ̃|² / N`` (coefficient quantization),
* ``T2 = |(U - Û) ĥ̃|² / N`` (basis mismatch),
* ``T3 = 2 Re[(h̃ - ĥ̃)^H U^H (U - Û) ĥ̃] / N`` (cross term).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelBatch, as_spectrum
from .errors import ValidationError
from .quantizers import rvq_chordal_samples
from .rng import RVQ_MC, stream
from .rwf import dq

IDENTITY_RTOL = 1e-9


@dataclass(frozen=True)
class MismatchModel:
    """Parameters of the basis-distortion model.

    ``c_n`` defaults to ``(n - 1) / n``, which gives ``alpha0 = (n - 1)/n²``.
    """

    n: int
    p: int
    tau: float
    c_n: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"n must be an integer >= 2, got {self.n!r}")
        if int(self.p) != self.p or not 0 <= self.p <= self.n:
            raise ValidationError(f"p must be in [0, n], got {self.p!r}")
        if not self.tau > 0:
            raise ValidationError(f"tau must be positive, got {self.tau!r}")
        if self.c_n is None:
            object.__setattr__(self, "c_n", (self.n - 1) / self.n)
        if not self.c_n > 0:
            raise ValidationError(f"c_n must be positive, got {self.c_n!r}")

    @property
    def alpha0(self):
        return self.c_n / self.n

    @property
    def beta0(self):
        if self.p == 0:
            return math.inf
        return self.n * self.tau / (self.p * (self.n - 1))

    def bits_per_column(self, r0):
        """Basis bits per dominant column bought by amortized rate ``r0``."""
        return r0 * self.n * self.tau / self.p if self.p else 0.0

    def basis_rate(self, bits_per_column):
        """Amortized rate of ``bits_per_column`` bits on each of ``p`` columns."""
        return self.p * bits_per_column / (self.n * self.tau)


def d0_model(lam, model: MismatchModel, r0):
    """``alpha0 * (sum of the p largest eigenvalues) * 2**(-beta0 * r0)``."""
    lam = as_spectrum(lam)
    if model.p > lam.size:
        raise ValidationError("p exceeds the spectrum length")
    if r0 < 0:
        raise ValidationError(f"r0 must be >= 0, got {r0!r}")
    if model.p == 0:
        return 0.0
    head = float(np.sum(lam[: model.p]))
    return model.alpha0 * head * 2.0 ** (-model.beta0 * r0)


def e2e_model(lam, model, rq, r0):
    """Analytic end-to-end distortion; the cross term is taken as zero."""
    return dq(lam, rq) + d0_model(lam, model, r0)


TAIL_KNOWN = "known"
TAIL_ZEROED = "zeroed"
TAIL_REORTHO = "reorthonormalized"
TAIL_MODES = (TAIL_KNOWN, TAIL_ZEROED, TAIL_REORTHO)


def reconstruction_basis(u, uq, tail=TAIL_KNOWN):
    """Basis the decoder reconstructs with.

    ``known`` keeps the quantized dominant columns and takes the columns
    beyond ``p`` from the true basis (the model's assumption). ``zeroed`` and
    ``reorthonormalized`` use the unitary quantizer output as is; for
    ``zeroed`` the encoder must also drop coefficients beyond ``p``
    (see :func:`drop_tail`).
    """
    if tail not in TAIL_MODES:
        raise ValidationError(f"tail must be one of {TAIL_MODES}, got {tail!r}")
    u_hat = np.asarray(getattr(uq, "matrix", uq), complex)
    p = getattr(uq, "p", None)
    if tail != TAIL_KNOWN or p is None or getattr(uq, "factors", None) is not None:
        return u_hat
    out = np.array(u, dtype=complex, copy=True)
    out[:, :p] = u_hat[:, :p]
    return out


def drop_tail(ht_hat, p):
    """Zero reconstructed coefficients beyond the ``p`` dominant modes."""
    out = np.array(ht_hat, dtype=complex, copy=True)
    out[..., p:] = 0.0
    return out


def distortion_terms(h, u, u_hat, ht_hat):
    """Per-realization ``[T1, T2, T3, E2E]``, shape ``(T, 4)``.

    ``E2E`` is computed directly from ``h - Û ĥ̃``, not from the other three.
    Rows of ``h`` and ``ht_hat`` are realizations.
    """
    h = np.asarray(h, complex)
    ht_hat = np.asarray(ht_hat, complex)
    u = np.asarray(u, complex)
    u_hat = np.asarray(u_hat, complex)
    n = u.shape[0]
    if h.shape != ht_hat.shape or h.shape[1] != n or u_hat.shape != u.shape:
        raise ValidationError("dimension mismatch between channels, bases and codewords")
    ht = h @ u.conj()
    err = ht - ht_hat
    diff = u - u_hat
    mis = ht_hat @ diff.T                       # rows: (U - Û) ĥ̃
    t1 = np.sum(np.abs(err) ** 2, axis=1) / n
    t2 = np.sum(np.abs(mis) ** 2, axis=1) / n
    # e^H U^H (U - Û) ĥ̃ = (U e)^H mis
    t3 = 2.0 * np.real(np.sum(np.conj(err @ u.T) * mis, axis=1)) / n
    e2e = np.sum(np.abs(h - ht_hat @ u_hat.T) ** 2, axis=1) / n
    return np.column_stack([t1, t2, t3, e2e])


@dataclass(frozen=True, eq=False)
class DistortionReport:
    """Analytic model values next to Monte Carlo averages.

    All distortions are MSE per complex dimension. Analytic fields are
    ``None`` until filled by :meth:`with_analytic`.
    """

    empirical_t1: float
    empirical_t2: float
    empirical_t3: float
    empirical_e2e: float
    trials: int
    identity_residual: float
    analytic_dq: float | None = None
    analytic_d0: float | None = None
    analytic_e2e: float | None = None
    per_trial: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_terms(cls, terms, keep=False):
        terms = np.asarray(terms, float)
        if terms.ndim != 2 or terms.shape[0] == 0:
            raise ValidationError("empty batch")
        means = [math.fsum(col) / terms.shape[0] for col in terms.T]
        gap = np.abs(terms[:, 3] - terms[:, :3].sum(axis=1))
        scale = np.maximum(terms[:, 3], np.finfo(float).tiny)
        return cls(*means, terms.shape[0], float(np.max(gap / scale)),
                   per_trial=terms if keep else None)

    def with_analytic(self, dq_value, d0_value):
        return replace(self, analytic_dq=dq_value, analytic_d0=d0_value,
                       analytic_e2e=dq_value + d0_value)


def decompose_distortion(batch: ChannelBatch, u, uq, codewords, keep=False, tail=TAIL_KNOWN):
    """Average the exact T1/T2/T3 split over a batch sharing one quantized basis.

    ``uq`` is a :class:`~rstc.quantizers.QuantizedBasis` or a plain matrix;
    ``codewords`` is a :class:`~rstc.quantizers.CoefficientCodeword` or the
    reconstructed coefficient array itself. ``tail`` picks how columns beyond
    ``p`` are handled (see :func:`reconstruction_basis`).
    """
    h = batch.realizations if isinstance(batch, ChannelBatch) else np.asarray(batch)
    if h.shape[0] == 0:
        raise ValidationError("empty batch")
    u_hat = reconstruction_basis(u, uq, tail)
    ht_hat = getattr(codewords, "reconstruction", codewords)
    p = getattr(uq, "p", None)
    if tail == TAIL_ZEROED and p is not None:
        ht_hat = drop_tail(ht_hat, p)
    return DistortionReport.from_terms(distortion_terms(h, u, u_hat, ht_hat), keep)


@dataclass(frozen=True)
class RVQFit:
    """Fixed-slope fit ``log2 E[d²] = log2 c_n - B/(n-1)`` over a bit sweep."""

    n: int
    bits: tuple
    mean_chordal_sq: tuple
    c_n: float
    residual: float
    free_slope: float


def fit_rvq_scaling(n, b_sweep, trials, seed):
    """Monte Carlo RVQ distortion over ``b_sweep`` and the fitted constant."""
    if int(n) != n or n < 2:
        raise ValidationError(f"n must be an integer >= 2, got {n!r}")
    bits = tuple(int(b) for b in b_sweep)
    if len(set(bits)) < 2:
        raise ValidationError("need at least two distinct sweep points")
    means = []
    for b in bits:
        samples = rvq_chordal_samples(int(n), b, trials, stream(seed, RVQ_MC, n, b))
        means.append(float(np.mean(samples)))
    x = -np.asarray(bits, float) / (n - 1)
    y = np.log2(means)
    intercept = float(np.mean(y - x))
    residual = float(np.max(np.abs(y - (x + intercept))))
    slope = float(np.polyfit(np.asarray(bits, float), y, 1)[0])
    return RVQFit(int(n), bits, tuple(means), 2.0**intercept, residual, slope)


def estimate_cn(n, b_sweep, trials, seed):
    """Empirical RVQ constant ``c_n`` (see :func:`fit_rvq_scaling`)."""
    return fit_rvq_scaling(n, b_sweep, trials, seed).c_n
