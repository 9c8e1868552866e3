"""What a quantized eigenbasis costs at the decoder.

The encoder projects on the true basis U, the decoder rebuilds with U_hat.
Per trial the error splits exactly into a coefficient term T1, a basis term
T2 and a cross term T3. T2 is what the D0 model predicts from the bits spent
on each basis column.
"""

import numpy as np

from rstc import (
    MismatchModel, QuantizerConfig, d0_model, decompose_distortion, eig_hermitian, exp_correlation,
    estimate_cn, quantize_coeffs, quantize_columns, sample_channels, water_level,
)
from rstc.mismatch import reconstruction_basis

n, p = 8, 2
u, lam = eig_hermitian(exp_correlation(n, 0.8))
batch = sample_channels(u, lam, 5000, seed=1)
coeffs = batch.realizations @ u.conj()
# the MMSE-scaled decoder keeps low-rate modes from overshooting their variance
cw = quantize_coeffs(coeffs, water_level(lam, 1.0), QuantizerConfig(post_scale=True), seed=2)

qb = quantize_columns(u, p, bits=10, seed=3)
rep = decompose_distortion(batch, u, qb, cw, keep=True)
print(f"T1={rep.empirical_t1:.5f}  T2={rep.empirical_t2:.5f}  T3={rep.empirical_t3:+.5f}  "
      f"E2E={rep.empirical_e2e:.5f}")
print(f"identity residual {rep.identity_residual:.1e}")

# columns past p are known at both ends; dropping them or letting the
# re-orthonormalization disturb them changes the basis term
for tail in ("known", "reorthonormalized", "zeroed"):
    r = decompose_distortion(batch, u, qb, cw, tail=tail)
    print(f"  tail={tail:18s} T2={r.empirical_t2:.5f}  E2E={r.empirical_e2e:.5f}")

# basis term alone against the model, with c_n fitted for n = 8
c_n = estimate_cn(n, range(6, 13), 4000, seed=4)
model = MismatchModel(n, p, tau=100, c_n=c_n)
for bits in (6, 9, 12):
    t2 = []
    for blk in range(300):
        qb = quantize_columns(u, p, bits, seed=5, key=(bits, blk))
        h = sample_channels(u, lam, 10, seed=blk).realizations
        u_hat = reconstruction_basis(u, qb)
        d = h - (h @ u.conj()) @ u_hat.T
        t2.append(np.sum(np.abs(d) ** 2, axis=1) / n)
    pred = d0_model(lam, model, model.basis_rate(bits))
    print(f"B={bits:2d}: T2 {np.mean(np.concatenate(t2)):.5f}  model {pred:.5f}")
