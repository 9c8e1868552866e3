"""Channel statistics: structured covariances, eigenbases and Gaussian draws.

Matrices are plain ``numpy`` arrays. A basis is an ``(N, N)`` complex array
whose columns are eigenvectors; a spectrum is a 1-D float array sorted in
non-increasing order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ValidationError
from .rng import check_seed, complex_normal, stream, CHANNEL

MAX_DIM = 16384
DENSE_EIG_MAX = 1024
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10


def exp_correlation(n, rho):
    """Exponential correlation matrix ``R[i, j] = rho**|i - j|``.

    Parameters
    ----------
    n : int
        Matrix dimension.
    rho : float
        Correlation coefficient in ``[0, 1)``.
    """
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    if not 0.0 <= rho < 1.0:
        raise ValidationError(f"rho must lie in [0, 1), got {rho!r}")
    idx = np.arange(int(n))
    return np.power(float(rho), np.abs(idx[:, None] - idx[None, :])).astype(complex)


def check_hermitian(r, tol=HERMITIAN_TOL):
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValidationError("matrix has non-finite entries")
    scale = max(np.linalg.norm(r), np.finfo(float).tiny)
    if np.linalg.norm(r - r.conj().T) > tol * scale:
        raise ValidationError("matrix is not Hermitian within tolerance")
    return r.astype(complex)


def kron_covariance(rs, rf, max_dim=MAX_DIM):
    """Separable covariance ``rs ⊗ rf``."""
    rs = check_hermitian(rs)
    rf = check_hermitian(rf)
    dim = rs.shape[0] * rf.shape[0]
    if dim > max_dim:
        raise CapacityError(f"Kronecker dimension {dim} exceeds the maximum {max_dim}")
    return np.kron(rs, rf)


def _sort_desc(w):
    # stable: ties keep the solver's original order
    return np.argsort(-w, kind="stable")


def as_spectrum(lam):
    """Validate an eigenvalue vector (finite, >= 0, non-increasing)."""
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValidationError("spectrum must be a non-empty 1-D array")
    if not np.all(np.isfinite(lam)):
        raise ValidationError("spectrum has non-finite entries")
    if np.any(lam < 0):
        raise ValidationError("spectrum has negative entries")
    if np.any(np.diff(lam) > 0):
        raise ValidationError("spectrum must be sorted in non-increasing order")
    return lam


def eig_hermitian(r):
    """Eigendecomposition ``R = U diag(lam) U^H`` with ``lam`` descending.

    Dense solves are limited to ``DENSE_EIG_MAX``; larger separable
    covariances go through :func:`kron_eigenbasis`.

    Returns
    -------
    u : (N, N) complex ndarray
    lam : (N,) float ndarray
    """
    r = check_hermitian(r)
    n = r.shape[0]
    if n > DENSE_EIG_MAX:
        raise CapacityError(
            f"dense eigensolve limited to dim {DENSE_EIG_MAX} (got {n}); "
            "compose factor eigendecompositions with kron_eigenbasis"
        )
    w, v = np.linalg.eigh((r + r.conj().T) / 2)
    order = _sort_desc(w)
    w, v = w[order], v[:, order]
    if w.size and w[-1] < -PSD_TOL * max(abs(w[0]), np.finfo(float).tiny):
        raise ValidationError("matrix is not positive semidefinite")
    return v, np.clip(w, 0.0, None)


def kron_order(ls, lf):
    """Column permutation that sorts the Kronecker spectrum ``ls ⊗ lf`` descending."""
    return _sort_desc(np.kron(as_spectrum(ls), as_spectrum(lf)))


def kron_eigenbasis(us, ls, uf, lf):
    """Eigenbasis and spectrum of ``Rs ⊗ Rf`` from the factor decompositions."""
    us, uf = np.asarray(us, complex), np.asarray(uf, complex)
    ls, lf = as_spectrum(ls), as_spectrum(lf)
    if us.shape != (ls.size, ls.size) or uf.shape != (lf.size, lf.size):
        raise ValidationError("basis and spectrum dimensions disagree")
    if ls.size * lf.size > MAX_DIM:
        raise CapacityError(f"Kronecker dimension {ls.size * lf.size} exceeds {MAX_DIM}")
    order = kron_order(ls, lf)
    return np.kron(us, uf)[:, order], np.kron(ls, lf)[order]


@dataclass(frozen=True, eq=False)
class ChannelBatch:
    """Channel realizations stacked row-wise, shape ``(count, dim)``."""

    realizations: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        h = np.asarray(self.realizations)
        if h.ndim != 2 or h.shape[0] == 0:
            raise ValidationError("batch must be a non-empty (count, dim) array")
        if not np.all(np.isfinite(h)):
            raise ValidationError("batch has non-finite entries")
        object.__setattr__(self, "realizations", h.astype(complex, copy=False))

    @property
    def count(self):
        return self.realizations.shape[0]

    @property
    def dim(self):
        return self.realizations.shape[1]

    def __len__(self):
        return self.count


def sample_channels(u, lam, count, seed, rng=None):
    """Draw ``count`` realizations of ``h = U diag(lam)^(1/2) z`` with ``z ~ CN(0, I)``.

    ``rng`` overrides the stream derived from ``seed`` (used by the harness to
    draw per-block streams).
    """
    u = np.asarray(u, complex)
    lam = as_spectrum(lam)
    if u.shape != (lam.size, lam.size):
        raise ValidationError("basis and spectrum dimensions disagree")
    if int(count) != count or count < 1:
        raise ValidationError(f"count must be a positive integer, got {count!r}")
    seed = check_seed(seed)
    if rng is None:
        rng = stream(seed, CHANNEL)
    z = complex_normal(rng, (int(count), lam.size))
    h = (z * np.sqrt(lam)) @ u.T
    return ChannelBatch(h, seed)
