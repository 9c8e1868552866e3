"""Random vector quantization of eigenvectors on the Grassmann manifold.

A unit vector is described up to phase by the index of the closest of 2^B
random unit vectors. The mean squared chordal error decays like
c_n 2^(-B/(n-1)), so each extra bit helps less as the dimension grows.
"""

import numpy as np

from rstc import estimate_cn, eig_hermitian, exp_correlation, fit_rvq_scaling, quantize_columns
from rstc.quantizers import rvq_chordal_samples
from rstc.rng import stream

for n in (2, 4, 8):
    fit = fit_rvq_scaling(n, range(2, 11), 4000, seed=1)
    print(f"n={n}: c_n={fit.c_n:.3f}  free slope {fit.free_slope:.3f} "
          f"(expected {-1 / (n - 1):.3f})  fit residual {fit.residual:.3f}")

# for n = 2 the mean is known exactly: K * Beta(K, 2) = 1 / (K + 1)
for b in (2, 4, 6):
    s = rvq_chordal_samples(2, b, 20_000, stream(0, b))
    print(f"n=2 B={b}: MC {s.mean():.5f}  exact {1 / (2**b + 1):.5f}")

# quantizing the dominant eigenvectors of a covariance
u, lam = eig_hermitian(exp_correlation(8, 0.8))
qb = quantize_columns(u, p=3, bits=10, seed=7)
print("\nchordal^2 of the 3 quantized columns:", np.round(qb.column_chordal_sq, 4))
print("reconstruction basis is unitary:",
      np.allclose(qb.matrix.conj().T @ qb.matrix, np.eye(8)))
print(f"c_8 over B=6..12: {estimate_cn(8, range(6, 13), 2000, seed=3):.3f}")
