"""Scalar quantizers for the KLT coefficients.

Two families are available. Lloyd-Max is the MSE-optimal fixed-rate design
for a Gaussian input. The uniform quantizer with subtractive dither is
entropy coded, so its rate can be tuned continuously to the water-filling
allocation.
"""

import math

import numpy as np

from rstc import (
    QuantizerConfig, eig_hermitian, exp_correlation, lloyd_max_design, quantize_coeffs,
    sample_channels, water_level,
)

print("Lloyd-Max on N(0, 1)")
for levels in (2, 4, 8, 16):
    q = lloyd_max_design(levels)
    bits = math.log2(levels)
    gap = 10 * math.log10(q.mse / 2.0 ** (-2 * bits))
    print(f"  L={levels:2d}  mse={q.mse:.5f}  gap to 2^(-2R) {gap:.2f} dB")
print("  L=4 codebook:", np.round(lloyd_max_design(4).codebook, 4))

# quantize KLT coefficients of a correlated array at the water-filling rates
u, lam = eig_hermitian(exp_correlation(8, 0.8))
h = sample_channels(u, lam, 20_000, seed=1).realizations
coeffs = h @ u.conj()
print("\ndithered ECSQ on 8 KLT coefficients")
for r in (0.25, 0.5, 1.0, 2.0):
    alloc = water_level(lam, r)
    for post in (False, True):
        cw = quantize_coeffs(coeffs, alloc, QuantizerConfig(post_scale=post), seed=2)
        mse = np.mean(np.sum(np.abs(coeffs - cw.reconstruction) ** 2, axis=1)) / 8
        gap = 10 * math.log10(mse / alloc.distortion)
        print(f"  r={r:4.2f} post_scale={post!s:5}  rate {cw.measured_rate:.4f}  "
              f"mse {mse:.4f}  gap {gap:5.2f} dB")
