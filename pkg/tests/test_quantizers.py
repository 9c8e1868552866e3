import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import beta as beta_fn

from rstc.channel import eig_hermitian, exp_correlation, kron_eigenbasis, kron_order, sample_channels
from rstc.errors import CapacityError, ValidationError
from rstc.quantizers import (
    QuantizerConfig, dithered_code_length, empirical_entropy, lloyd_max_design, quantize_basis,
    quantize_coeffs, quantize_columns, rvq_chordal_samples, rvq_codebook, rvq_quantize,
    uniform_dithered,
)
from rstc.rng import BASIS, complex_normal, stream
from rstc.rwf import water_level


def grid_lloyd(levels, step=1e-4, lim=9.0, iters=200_000):
    """Lloyd iteration on a dense discretization of N(0, 1)."""
    x = np.arange(-lim, lim + step / 2, step)
    w = np.exp(-0.5 * x * x)
    w /= w.sum()
    c = np.linspace(-1.5, 1.5, levels)
    for _ in range(iters):
        t = 0.5 * (c[:-1] + c[1:])
        cell = np.searchsorted(t, x)
        mass = np.bincount(cell, w, levels)
        new = np.bincount(cell, w * x, levels) / mass
        new = 0.5 * (new - new[::-1])        # keep the symmetric solution
        if np.max(np.abs(new - c)) < 1e-11:
            c = new
            break
        c = new
    cell = np.searchsorted(0.5 * (c[:-1] + c[1:]), x)
    return c, float(np.sum(w * (x - c[cell]) ** 2))


def unit_vectors(rng, count, n):
    z = complex_normal(rng, (count, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# ---- Lloyd-Max -------------------------------------------------------------

def test_lloyd_two_levels_closed_form():
    q = lloyd_max_design(2)
    np.testing.assert_allclose(q.codebook, [-math.sqrt(2 / math.pi), math.sqrt(2 / math.pi)], atol=1e-10)
    assert q.mse == pytest.approx(1 - 2 / math.pi, abs=1e-10)


def test_lloyd_one_level():
    q = lloyd_max_design(1)
    assert list(q.codebook) == [0.0] and q.mse == pytest.approx(1.0)


@pytest.mark.parametrize("levels", [2, 3, 4, 8])
def test_lloyd_matches_grid_oracle(levels):
    c, mse = grid_lloyd(levels)
    q = lloyd_max_design(levels)
    # the discrete fixed point sits O(step) away in the flat codepoint directions
    np.testing.assert_allclose(q.codebook, c, atol=1e-3)
    assert q.mse == pytest.approx(mse, rel=1e-5)


def test_lloyd_four_levels_mse():
    assert lloyd_max_design(4).mse == pytest.approx(0.1175, abs=1e-4)


@pytest.mark.parametrize("levels", [2, 5, 16, 64])
def test_lloyd_fixed_point(levels):
    q = lloyd_max_design(levels)
    t, c = q.thresholds, q.codebook
    assert np.all(np.diff(t) > 0)
    assert np.all((c > t[:-1]) & (c < t[1:]))
    np.testing.assert_allclose(t[1:-1], 0.5 * (c[:-1] + c[1:]), atol=1e-8)
    # centroid condition by numerical integration of each cell
    from scipy.integrate import quad
    pdf = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    for j in range(levels):
        a, b = t[j], t[j + 1]
        m0 = quad(pdf, a, b)[0]
        m1 = quad(lambda x: x * pdf(x), a, b)[0]
        assert m1 / m0 == pytest.approx(c[j], abs=1e-8)


def test_lloyd_errors():
    with pytest.raises(ValidationError):
        lloyd_max_design(0)
    with pytest.raises(CapacityError):
        lloyd_max_design(2**16 + 1)


def test_lloyd_quantize_reconstruct():
    q = lloyd_max_design(4)
    x = np.array([-5.0, -0.2, 0.2, 5.0])
    np.testing.assert_array_equal(q.quantize(x), [0, 1, 2, 3])
    assert np.all(np.isin(q.reconstruct(q.quantize(x)), q.codebook))


# ---- entropy ---------------------------------------------------------------

def test_entropy_examples():
    assert empirical_entropy([3, 3, 3]) == 0.0
    assert empirical_entropy([0, 1] * 50) == pytest.approx(1.0)
    x = np.random.default_rng(0).standard_normal(100_000)
    assert empirical_entropy(lloyd_max_design(2).quantize(x)) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValidationError):
        empirical_entropy([])


# ---- dithered uniform ------------------------------------------------------

def test_dither_contract():
    rng = np.random.default_rng(1)
    n, step = 200_000, 0.7
    x = rng.standard_normal(n)
    d = step * (0.5 - rng.random(n))
    q = uniform_dithered(step)
    err = q.reconstruct(q.quantize(x, d), d) - x
    assert np.all(np.abs(err) <= step / 2 + 1e-12)
    assert abs(np.corrcoef(err, x)[0, 1]) < 0.01
    assert abs(err.mean()) < 3 * err.std() / math.sqrt(n)
    assert err.var() == pytest.approx(step**2 / 12, rel=0.02)
    assert q.mse == pytest.approx(step**2 / 12)


def test_dithered_code_length_is_model_entropy():
    # large step, zero dither: nearly all mass in cell 0, so length ~ -log2 P(cell 0)
    step = 10.0
    length = dithered_code_length(np.zeros(5), np.zeros(5), step)
    p0 = math.erf(step / 2 / math.sqrt(2))
    assert length == pytest.approx(-math.log2(p0))


def test_uniform_rejects_step():
    for bad in (0.0, -1.0, math.inf):
        with pytest.raises(ValidationError):
            uniform_dithered(bad)


# ---- quantize_coeffs -------------------------------------------------------

def _white_coeffs(n, count, seed):
    return sample_channels(np.eye(n), np.ones(n), count, seed).realizations


def test_zero_allocation_reconstructs_zero():
    lam = np.array([3.0, 1.0])
    x = sample_channels(np.eye(2), lam, 100, 0).realizations
    cw = quantize_coeffs(x, water_level(lam, 0.0), seed=1)
    assert not cw.reconstruction.any()
    assert cw.indices.shape == (100, 0, 2)
    assert cw.measured_rate == 0.0


def test_lloyd_two_level_white_mse():
    x = _white_coeffs(4, 50_000, 2)
    alloc = water_level(np.ones(4), 2.0)      # 1 bit per real component
    cw = quantize_coeffs(x, alloc, QuantizerConfig("lloyd_max_fixed_rate"))
    assert all(q.levels_or_step == 2 for q in cw.quantizers)
    # per complex coefficient error = 2 components * (lam/2) * mse
    err = np.mean(np.abs(x - cw.reconstruction) ** 2)
    assert err == pytest.approx(1 - 2 / math.pi, rel=0.02)
    assert cw.measured_rate == pytest.approx(2.0, abs=0.01)


def test_inactive_modes_stay_zero():
    lam = np.array([8.0, 4.0, 0.1, 0.05])
    x = sample_channels(np.eye(4), lam, 500, 3).realizations
    alloc = water_level(lam, 0.5)
    cw = quantize_coeffs(x, alloc, seed=4)
    inactive = np.setdiff1d(np.arange(4), alloc.active_set)
    assert inactive.size and not cw.reconstruction[:, inactive].any()
    assert cw.indices.shape[1] == alloc.active_set.size


@pytest.mark.parametrize("post_scale", [False, True])
def test_dithered_rate_matches_target(post_scale):
    lam = np.array([4.0, 2.0, 1.0, 0.5])
    x = sample_channels(np.eye(4), lam, 20_000, 5).realizations
    alloc = water_level(lam, 1.0)
    cw = quantize_coeffs(x, alloc, QuantizerConfig(post_scale=post_scale), seed=6)
    # the code length moves in small jumps as indices change with the step
    np.testing.assert_allclose(cw.mode_rate, alloc.per_mode_rate[alloc.active_set], atol=1e-3)
    assert cw.measured_rate == pytest.approx(1.0, abs=1e-3)


def test_dithered_error_matches_step_without_post_scale():
    lam = np.array([4.0, 1.0])
    x = sample_channels(np.eye(2), lam, 40_000, 7).realizations
    alloc = water_level(lam, 2.0)
    cw = quantize_coeffs(x, alloc, QuantizerConfig(post_scale=False), seed=8)
    for j, m in enumerate(alloc.active_set):
        step = cw.quantizers[j].levels_or_step
        err = np.mean(np.abs(x[:, m] - cw.reconstruction[:, m]) ** 2)
        assert err == pytest.approx(lam[m] * step**2 / 12, rel=0.03)


def test_dither_shared_from_seed():
    lam = np.array([2.0, 1.0])
    x = sample_channels(np.eye(2), lam, 100, 9).realizations
    alloc = water_level(lam, 1.5)
    cfg = QuantizerConfig(post_scale=True)
    a = quantize_coeffs(x, alloc, cfg, seed=10)
    b = quantize_coeffs(x, alloc, cfg, seed=10)
    assert np.array_equal(a.dither, b.dither) and np.array_equal(a.indices, b.indices)
    # decoder side: indices + dither + step reproduce the reconstruction
    j, m = 0, alloc.active_set[0]
    q = a.quantizers[j]
    y = q.reconstruct(a.indices[:, j, :], a.dither[:, j, :]) / (1 + q.levels_or_step**2 / 12)
    recon = math.sqrt(lam[m] / 2) * (y[:, 0] + 1j * y[:, 1])
    np.testing.assert_allclose(recon, a.reconstruction[:, m])


def test_codeword_indexing():
    lam = np.array([2.0, 1.0])
    x = sample_channels(np.eye(2), lam, 10, 0).realizations
    cw = quantize_coeffs(x, water_level(lam, 1.0), seed=0)
    assert len(cw) == 10 and len(cw[2]) == 1 and len(cw[2:5]) == 3


def test_quantize_coeffs_dimension_mismatch():
    with pytest.raises(ValidationError):
        quantize_coeffs(np.zeros((3, 4), complex), water_level(np.ones(3), 1.0))


# ---- RVQ -------------------------------------------------------------------

def test_codebook_basics():
    cb = rvq_codebook(4, 0, seed=1)
    assert cb.shape == (1, 4)
    cb = rvq_codebook(5, 12, seed=2)
    np.testing.assert_allclose(np.linalg.norm(cb, axis=1), 1.0, atol=1e-12)
    assert np.array_equal(cb, rvq_codebook(5, 12, seed=2))
    with pytest.raises(CapacityError):
        rvq_codebook(4, 25, seed=0)


def test_codebook_pairwise_moment():
    n = 6
    cb = rvq_codebook(n, 14, seed=3)
    g = np.abs(np.sum(cb[::2].conj() * cb[1::2], axis=1)) ** 2
    # Beta(1, n-1) has mean 1/n and variance (n-1)/(n^2 (n+1))
    sd = math.sqrt((n - 1) / (n * n * (n + 1)) / g.size)
    assert abs(g.mean() - 1 / n) < 4 * sd


def test_rvq_quantize_exact_hit():
    cb = rvq_codebook(3, 5, seed=4)
    i, d = rvq_quantize(cb[17] * np.exp(0.3j), cb)
    assert i == 17 and d == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValidationError):
        rvq_quantize(cb[0], np.empty((0, 3)))


@pytest.mark.parametrize("n", [2, 4, 8])
def test_rvq_zero_bits_mean(n):
    d = rvq_chordal_samples(n, 0, 40_000, np.random.default_rng(n))
    # 1 - |u^H c|^2 ~ Beta(n-1, 1)
    sd = math.sqrt((n - 1) / (n * n * (n + 1)) / d.size)
    assert abs(d.mean() - (n - 1) / n) < 4 * sd


@pytest.mark.parametrize("bits", [1, 3, 6])
def test_rvq_exact_moment_n2(bits):
    k = 2**bits
    exact = k * beta_fn(k, 2.0)            # = 1/(k+1) for n = 2
    assert exact == pytest.approx(1 / (k + 1))
    d = rvq_chordal_samples(2, bits, 20_000, np.random.default_rng(bits))
    assert abs(d.mean() - exact) < 3 * d.std() / math.sqrt(d.size)


def test_rvq_samples_agree_with_codebook_search():
    # same law through the streaming codebook path
    rng = np.random.default_rng(11)
    n, bits, trials = 3, 6, 1500
    d = []
    for t in range(trials):
        u = unit_vectors(rng, 1, n)[0]
        cb = rvq_codebook(n, bits, seed=0, rng=rng)
        d.append(rvq_quantize(u, cb)[1])
    d = np.array(d)
    ref = rvq_chordal_samples(n, bits, trials, np.random.default_rng(12))
    se = math.hypot(d.std(), ref.std()) / math.sqrt(trials)
    assert abs(d.mean() - ref.mean()) < 4 * se


# ---- basis quantization ----------------------------------------------------

def _basis(n, rho=0.8):
    return eig_hermitian(exp_correlation(n, rho))[0]


def test_quantize_columns_p0_exact():
    u = _basis(4)
    qb = quantize_columns(u, 0, 6, seed=1)
    assert np.array_equal(qb.matrix, u) and qb.column_chordal_sq.size == 0


def test_quantize_columns_injected_codebooks_recover_basis():
    u = _basis(5)
    rng = np.random.default_rng(3)
    books = []
    for m in range(3):
        cb = unit_vectors(rng, 16, 5)
        cb[7] = u[:, m] * np.exp(1j * m)     # arbitrary phase
        books.append(cb)
    qb = quantize_columns(u, 3, 4, seed=0, codebooks=books)
    np.testing.assert_allclose(qb.matrix, u, atol=1e-12)
    np.testing.assert_allclose(qb.column_chordal_sq, 0.0, atol=1e-14)


def test_quantize_columns_dim4_unitary_and_chordal():
    u = _basis(4)
    seed, bits = 5, 6
    qb = quantize_columns(u, 2, bits, seed)
    m = qb.matrix
    assert np.linalg.norm(m.conj().T @ m - np.eye(4)) <= 1e-10
    for col in range(2):
        cb = rvq_codebook(4, bits, seed, rng=stream(seed, BASIS, col))
        _, d = rvq_quantize(u[:, col], cb)
        assert qb.column_chordal_sq[col] == pytest.approx(d, abs=1e-14)


def test_quantize_columns_phase_alignment():
    u = _basis(4)
    qb = quantize_columns(u, 2, 8, seed=2)
    inner = np.vdot(u[:, 0], qb.matrix[:, 0])
    assert abs(inner.imag) < 1e-12 and inner.real > 0
    # column 0 is only normalized by re-orthonormalization
    assert 1 - abs(inner) ** 2 == pytest.approx(qb.column_chordal_sq[0], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_quantize_columns_always_unitary(n, bits, seed):
    u = _basis(n, 0.6)
    p = min(n, 1 + seed % n)
    qb = quantize_columns(u, p, bits, seed)
    assert np.linalg.norm(qb.matrix.conj().T @ qb.matrix - np.eye(n)) <= 1e-10
    assert np.all((qb.column_chordal_sq >= 0) & (qb.column_chordal_sq <= 1))


def test_norm_equivalence_at_small_error():
    n = 2
    u = _basis(n)
    ratios = []
    for seed in range(200):
        qb = quantize_columns(u, 1, 10, seed)
        c = qb.column_chordal_sq[0]
        if 0 < c < 0.05:
            ratios.append(np.linalg.norm(u[:, 0] - qb.matrix[:, 0]) ** 2 / c)
    assert len(ratios) > 100
    assert 0.9 <= min(ratios) and max(ratios) <= 1.1


def test_quantize_basis_kron_order_and_recovery():
    us, ls = eig_hermitian(exp_correlation(3, 0.8))
    uf, lf = eig_hermitian(exp_correlation(2, 0.5))
    u, _ = kron_eigenbasis(us, ls, uf, lf)
    order = kron_order(ls, lf)
    rng = np.random.default_rng(4)
    books_s = [np.vstack([unit_vectors(rng, 3, 3), us[:, 0]])]
    books_f = [np.vstack([uf[:, 0], unit_vectors(rng, 3, 2)])]
    qb = quantize_basis(us, uf, 1, 1, 2, seed=0, order=order,
                        codebooks_s=books_s, codebooks_f=books_f)
    np.testing.assert_allclose(qb.matrix, u, atol=1e-12)
    assert qb.p == 2 and qb.column_chordal_sq.shape == (2,)


def test_quantize_basis_zero_columns_exact():
    us, ls = eig_hermitian(exp_correlation(3, 0.8))
    uf, lf = eig_hermitian(exp_correlation(2, 0.5))
    qb = quantize_basis(us, uf, 0, 0, 5, seed=0)
    np.testing.assert_array_equal(qb.matrix, np.kron(us, uf))


def test_quantize_basis_split_bits_unitary():
    us = _basis(4)
    uf = _basis(3)
    qb = quantize_basis(us, uf, 2, 1, (5, 3), seed=7)
    assert qb.bits_per_column == (5, 3)
    m = qb.matrix
    assert np.linalg.norm(m.conj().T @ m - np.eye(12)) <= 1e-10


def test_quantize_columns_errors():
    u = _basis(3)
    with pytest.raises(ValidationError):
        quantize_columns(u, 4, 3, seed=0)
    with pytest.raises(CapacityError):
        quantize_columns(u, 1, 25, seed=0)
    with pytest.raises(ValidationError):
        quantize_columns(u[:, :2], 1, 3, seed=0)
