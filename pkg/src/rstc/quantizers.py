"""Scalar quantizers for KLT coefficients and Grassmannian RVQ for basis columns.

Coefficient quantizers work on unit-variance real components: every active
complex coefficient ``h_m`` is split into real and imaginary parts and each
part is divided by ``sqrt(lam_m / 2)`` before quantization.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import CapacityError, ConvergenceError, ValidationError
from .rng import BASIS, BASIS_F, DITHER, check_seed, complex_normal, stream
from .rwf import BitAllocation

LLOYD_MAX_LEVELS = 2**16
LLOYD_TOL = 1e-10
LLOYD_MAX_ITER = 100_000
RVQ_MAX_BITS = 24
_RVQ_CHUNK = 1 << 14
_MIN_PROB = 1e-300

LLOYD_MAX = "lloyd_max_fixed_rate"
DITHERED = "uniform_dithered"
KINDS = (LLOYD_MAX, DITHERED)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _pdf(x):
    with np.errstate(over="ignore", invalid="ignore"):
        out = _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))
    return np.where(np.isfinite(x), out, 0.0)


def _cell_prob(a, b):
    """P(a <= X < b) for X ~ N(0, 1), accurate in both tails."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    upper = ndtr(-a) - ndtr(-b)
    lower = ndtr(b) - ndtr(a)
    return np.where(a >= 0, upper, lower)


def _x_pdf(x):
    # x * phi(x), zero at +-inf
    return np.where(np.isfinite(x), x * _pdf(np.where(np.isfinite(x), x, 0.0)), 0.0)


# --------------------------------------------------------------------------
# scalar quantizers
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarQuantizer:
    """A designed scalar quantizer for unit-variance real inputs.

    For ``kind == "lloyd_max_fixed_rate"`` ``levels_or_step`` is the level
    count, ``codebook`` holds the reconstruction points and ``thresholds``
    the ``L + 1`` cell boundaries including ``-inf`` and ``+inf``. For
    ``kind == "uniform_dithered"`` it is the step ``Δ`` and the lattice
    ``{kΔ}`` is implicit, so both arrays are empty.
    """

    kind: str
    levels_or_step: float
    codebook: np.ndarray
    thresholds: np.ndarray

    def quantize(self, x, dither=None):
        x = np.asarray(x, float)
        if self.kind == LLOYD_MAX:
            return np.searchsorted(self.thresholds[1:-1], x, side="right")
        step = self.levels_or_step
        y = x if dither is None else x + dither
        return np.floor(y / step + 0.5).astype(np.int64)

    def reconstruct(self, indices, dither=None):
        indices = np.asarray(indices)
        if self.kind == LLOYD_MAX:
            return self.codebook[indices]
        y = indices * self.levels_or_step
        return y if dither is None else y - dither

    @property
    def mse(self):
        """Mean squared error on N(0, 1) input (``Δ²/12`` for the dithered lattice)."""
        if self.kind == DITHERED:
            return self.levels_or_step**2 / 12.0
        return _lloyd_mse(self.codebook, self.thresholds)


def _lloyd_mse(c, t):
    a, b = t[:-1], t[1:]
    p = _cell_prob(a, b)
    m1 = _pdf(a) - _pdf(b)
    m2 = p + _x_pdf(a) - _x_pdf(b)
    return float(np.sum(m2 - 2.0 * c * m1 + c * c * p))


@lru_cache(maxsize=256)
def lloyd_max_design(levels, tol=LLOYD_TOL, max_iter=LLOYD_MAX_ITER):
    """Lloyd-Max quantizer for the unit Gaussian.

    Alternates centroid and midpoint updates, starting from the Gaussian
    quantiles, until no codepoint moves by more than ``tol``.
    """
    if int(levels) != levels or levels < 1:
        raise ValidationError(f"levels must be a positive integer, got {levels!r}")
    levels = int(levels)
    if levels > LLOYD_MAX_LEVELS:
        raise CapacityError(f"levels {levels} exceeds {LLOYD_MAX_LEVELS}")
    if levels == 1:
        c = np.zeros(1)
        t = np.array([-np.inf, np.inf])
        return ScalarQuantizer(LLOYD_MAX, 1, c, t)

    from scipy.special import ndtri

    c = ndtri((np.arange(levels) + 0.5) / levels)
    for _ in range(max_iter):
        t = np.concatenate(([-np.inf], 0.5 * (c[:-1] + c[1:]), [np.inf]))
        a, b = t[:-1], t[1:]
        new = (_pdf(a) - _pdf(b)) / _cell_prob(a, b)
        moved = np.max(np.abs(new - c))
        c = new
        if moved < tol:
            break
    else:
        raise ConvergenceError(f"Lloyd-Max iteration did not converge for L={levels}")
    t = np.concatenate(([-np.inf], 0.5 * (c[:-1] + c[1:]), [np.inf]))
    c.setflags(write=False)
    t.setflags(write=False)
    return ScalarQuantizer(LLOYD_MAX, levels, c, t)


def uniform_dithered(step):
    if not np.isfinite(step) or step <= 0:
        raise ValidationError(f"step must be positive, got {step!r}")
    return ScalarQuantizer(DITHERED, float(step), np.empty(0), np.empty(0))


def empirical_entropy(indices):
    """Plug-in entropy of an index sequence, in bits per symbol."""
    idx = np.asarray(indices).ravel()
    if idx.size == 0:
        raise ValidationError("empty index sequence")
    _, counts = np.unique(idx, return_counts=True)
    p = counts / idx.size
    return float(-np.sum(p * np.log2(p)))


def dithered_code_length(indices, dither, step):
    """Mean ideal code length of dithered indices, bits per symbol.

    Each index is charged ``-log2 P(k | d)`` under the unit-Gaussian source
    model with the shared dither ``d`` known to both ends; this is what an
    arithmetic coder driven by that model spends.
    """
    k = np.asarray(indices, float)
    d = np.asarray(dither, float)
    lo = (k - 0.5) * step - d
    p = _cell_prob(lo, lo + step)
    return float(-np.mean(np.log2(np.maximum(p, _MIN_PROB))))


@dataclass(frozen=True)
class QuantizerConfig:
    """How active coefficients are quantized.

    ``post_scale`` applies the decoder-side MMSE gain ``1/(1 + Δ²/12)`` to
    dithered reconstructions. Without it the dithered error is exactly
    uniform and input-independent, but exceeds the signal variance at low
    rates.
    """

    kind: str = DITHERED
    post_scale: bool = False
    max_step: float = 1e6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown quantizer kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class CoefficientCodeword:
    """Quantized KLT coefficients for a batch of realizations.

    Array axes are (realization, active mode, real/imag). ``dither`` is in
    unit-variance units and ``None`` for the fixed-rate quantizer.
    """

    active: np.ndarray
    indices: np.ndarray
    dither: np.ndarray | None
    quantizers: tuple
    reconstruction: np.ndarray
    mode_rate: np.ndarray
    index_entropy: np.ndarray

    def __len__(self):
        return self.reconstruction.shape[0]

    def __getitem__(self, i):
        sl = slice(i, i + 1) if isinstance(i, (int, np.integer)) else i
        return CoefficientCodeword(
            self.active,
            self.indices[sl],
            None if self.dither is None else self.dither[sl],
            self.quantizers,
            self.reconstruction[sl],
            self.mode_rate,
            self.index_entropy,
        )

    @property
    def measured_rate(self):
        """Spent rate in bits per complex dimension, averaged over all modes."""
        return float(np.sum(self.mode_rate) / self.reconstruction.shape[1])


def _match_step(x, u, target, max_step):
    """Step whose dithered code length on ``x`` equals ``target`` bits/sample."""

    def excess(log_step):
        step = math.exp(log_step)
        k = np.floor(x / step + u + 0.5)
        return dithered_code_length(k, u * step, step) - target

    # high-rate guess: h(N(0,1)) - log2(step) = target
    guess = 0.5 * math.log(2 * math.pi * math.e) - target * math.log(2)
    lo = hi = guess
    while excess(lo) <= 0:
        lo -= 1.0
        if lo < -60:
            raise ConvergenceError("no step reaches the target rate")
    log_max = math.log(max_step)
    while excess(hi) >= 0:
        hi += 1.0
        if hi >= log_max:
            return max_step
    return math.exp(brentq(excess, lo, hi, xtol=1e-12, rtol=1e-12, maxiter=200))


def quantize_coeffs(coeffs, alloc: BitAllocation, config=None, seed=0, rng=None):
    """Quantize KLT coefficients according to a water-filling allocation.

    Parameters
    ----------
    coeffs : (T, N) complex ndarray
        KLT-domain coefficients, one realization per row.
    alloc : BitAllocation
        Per-mode rates; inactive modes reconstruct to zero.
    config : QuantizerConfig
    seed : int
        Shared-dither seed. Encoder and decoder regenerate the same dither
        from it, row by row.
    rng : numpy Generator, optional
        Overrides the dither stream derived from ``seed``.

    Returns
    -------
    CoefficientCodeword
    """
    config = config or QuantizerConfig()
    x = np.asarray(coeffs, complex)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != alloc.n:
        raise ValidationError(
            f"coefficient shape {x.shape} does not match allocation dimension {alloc.n}"
        )
    t, n = x.shape
    active = alloc.active_set
    k = active.size
    recon = np.zeros((t, n), complex)
    indices = np.zeros((t, k, 2), np.int64)
    mode_rate = np.zeros(k)
    index_entropy = np.zeros(k)
    quantizers = []

    dither = None
    if config.kind == DITHERED and k:
        if rng is None:
            rng = stream(check_seed(seed), DITHER)
        # uniform on (-1/2, 1/2]
        dither = 0.5 - rng.random((t, k, 2))

    for j, m in enumerate(active):
        scale = math.sqrt(alloc.spectrum[m] / 2.0)
        comp = np.stack([x[:, m].real, x[:, m].imag], axis=-1) / scale
        bits = alloc.per_mode_rate[m] / 2.0
        if config.kind == LLOYD_MAX:
            levels = min(max(1, int(round(2.0**bits))), LLOYD_MAX_LEVELS)
            q = lloyd_max_design(levels)
            idx = q.quantize(comp)
            y = q.reconstruct(idx)
            mode_rate[j] = 2.0 * empirical_entropy(idx)
        else:
            u = dither[:, j, :]
            step = _match_step(comp, u, bits, config.max_step)
            q = uniform_dithered(step)
            d = u * step
            dither[:, j, :] = d
            idx = q.quantize(comp, d)
            y = q.reconstruct(idx, d)
            if config.post_scale:
                y = y / (1.0 + step * step / 12.0)
            mode_rate[j] = 2.0 * dithered_code_length(idx, d, step)
        index_entropy[j] = 2.0 * empirical_entropy(idx)
        indices[:, j, :] = idx
        recon[:, m] = scale * (y[:, 0] + 1j * y[:, 1])
        quantizers.append(q)

    return CoefficientCodeword(
        active.copy(), indices, dither, tuple(quantizers), recon, mode_rate, index_entropy
    )


# --------------------------------------------------------------------------
# random vector quantization on G(n, 1)
# --------------------------------------------------------------------------


def _check_bits(bits):
    if int(bits) != bits or bits < 0:
        raise ValidationError(f"bits must be a non-negative integer, got {bits!r}")
    if bits > RVQ_MAX_BITS:
        raise CapacityError(f"{bits} bits exceeds the RVQ codebook guard of {RVQ_MAX_BITS}")
    return int(bits)


def _unit_rows(z):
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def _rvq_chunks(n, bits, rng):
    size = 1 << bits
    for start in range(0, size, _RVQ_CHUNK):
        yield start, _unit_rows(complex_normal(rng, (min(_RVQ_CHUNK, size - start), n)))


def rvq_codebook(n, bits, seed, rng=None):
    """``2**bits`` i.i.d. unit vectors, uniform on the complex sphere in ``C^n``."""
    if int(n) != n or n < 1:
        raise ValidationError(f"dimension must be a positive integer, got {n!r}")
    bits = _check_bits(bits)
    if rng is None:
        rng = stream(check_seed(seed), BASIS)
    return np.concatenate([c for _, c in _rvq_chunks(int(n), bits, rng)])


def rvq_quantize(u, codebook):
    """Nearest codeword in chordal distance.

    Returns ``(index, chordal_sq)`` with ``chordal_sq = 1 - max |u^H c|^2``.
    """
    codebook = np.asarray(codebook, complex)
    if codebook.ndim != 2 or codebook.shape[0] == 0:
        raise ValidationError("empty codebook")
    gains = np.abs(codebook @ np.conj(np.asarray(u, complex))) ** 2
    i = int(np.argmax(gains))
    return i, float(max(0.0, 1.0 - gains[i]))


def _rvq_search(u, bits, rng):
    """Streaming version of ``rvq_quantize(u, rvq_codebook(...))``."""
    best_i, best_g, best_c = -1, -1.0, None
    uc = np.conj(u)
    for start, chunk in _rvq_chunks(u.size, bits, rng):
        g = np.abs(chunk @ uc) ** 2
        j = int(np.argmax(g))
        if g[j] > best_g:
            best_i, best_g, best_c = start + j, float(g[j]), chunk[j]
    return best_i, best_c, max(0.0, 1.0 - best_g)


def rvq_chordal_samples(n, bits, trials, rng):
    """Squared chordal errors of ``trials`` independent RVQ draws.

    Each trial draws its own random unit vector and its own codebook.
    """
    bits = _check_bits(bits)
    size = 1 << bits
    out = np.empty(int(trials))
    per = max(1, (1 << 21) // (size * n))
    for s in range(0, out.size, per):
        m = min(per, out.size - s)
        u = _unit_rows(complex_normal(rng, (m, n)))
        c = complex_normal(rng, (m, size, n))
        ip = (c @ np.conj(u)[:, :, None])[..., 0]
        # |u^H c|^2 / |c|^2 without normalizing every codeword
        norm2 = np.einsum("tkn,tkn->tk", c.real, c.real) + np.einsum("tkn,tkn->tk", c.imag, c.imag)
        g = (ip.real**2 + ip.imag**2) / norm2
        out[s:s + m] = 1.0 - g.max(axis=1)
    return np.maximum(out, 0.0)


@dataclass(frozen=True, eq=False)
class QuantizedBasis:
    """Unitary reconstruction basis with the quantization errors behind it.

    ``column_chordal_sq`` holds ``1 - |u_m^H û_m|^2`` for the quantized
    columns before re-orthonormalization. For a Kronecker basis ``factors``
    holds the two factor results, and the chordal list is their concatenation.
    """

    matrix: np.ndarray
    p: int
    bits_per_column: float
    column_chordal_sq: np.ndarray
    factors: tuple | None = None


def _reorthonormalize(a):
    # Householder QR with the phases of diag(R) pushed back into Q equals
    # Gram-Schmidt in column order: column 0 is kept, later ones are projected
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return q * ph[None, :]


def quantize_columns(u, p, bits, seed, codebooks=None, key=(), purpose=BASIS):
    """RVQ-quantize the first ``p`` columns of a unitary basis.

    Each quantized column is phase-aligned so that ``u_m^H û_m >= 0``; the
    remaining columns are copied from ``u`` and the whole set is
    re-orthonormalized in column order (quantized dominant columns first).

    ``codebooks`` (one per column) replaces the random codebooks; otherwise
    column ``m`` uses the stream ``(seed, purpose, *key, m)``.
    """
    u = np.asarray(u, complex)
    n = u.shape[0]
    if u.ndim != 2 or u.shape[1] != n:
        raise ValidationError("basis must be square")
    if int(p) != p or not 0 <= p <= n:
        raise ValidationError(f"p must be in [0, {n}], got {p!r}")
    p = int(p)
    if codebooks is None:
        bits = _check_bits(bits)
        seed = check_seed(seed)
    elif len(codebooks) < p:
        raise ValidationError("need one codebook per quantized column")
    if p == 0:
        return QuantizedBasis(u.copy(), 0, bits, np.empty(0))

    cols = u.copy()
    chordal = np.empty(p)
    for m in range(p):
        if codebooks is not None:
            cb = np.asarray(codebooks[m], complex)
            i, chordal[m] = rvq_quantize(u[:, m], cb)
            c = cb[i] / np.linalg.norm(cb[i])
        else:
            _, c, chordal[m] = _rvq_search(u[:, m], bits, stream(seed, purpose, *key, m))
        inner = np.vdot(u[:, m], c)
        cols[:, m] = c * np.exp(-1j * np.angle(inner))
    return QuantizedBasis(_reorthonormalize(cols), p, bits, chordal)


def quantize_basis(us, uf, p_s, p_f, bits_per_column, seed, order=None, key=(),
                   codebooks_s=None, codebooks_f=None):
    """Quantize the dominant columns of both Kronecker factors.

    ``bits_per_column`` is either one count for every column or a pair
    ``(B_s, B_f)``. ``order`` is the column permutation from
    :func:`rstc.channel.kron_order`; when given, the effective basis columns
    line up with :func:`rstc.channel.kron_eigenbasis`.
    """
    if np.ndim(bits_per_column) == 0:
        b_s = b_f = bits_per_column
    else:
        b_s, b_f = bits_per_column
    qs = quantize_columns(us, p_s, b_s, seed, codebooks_s, key, BASIS)
    qf = quantize_columns(uf, p_f, b_f, seed, codebooks_f, key, BASIS_F)
    matrix = np.kron(qs.matrix, qf.matrix)
    if order is not None:
        matrix = matrix[:, np.asarray(order)]
    return QuantizedBasis(
        matrix,
        qs.p + qf.p,
        bits_per_column if np.ndim(bits_per_column) == 0 else tuple(bits_per_column),
        np.concatenate([qs.column_chordal_sq, qf.column_chordal_sq]),
        (qs, qf),
    )
