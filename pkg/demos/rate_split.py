"""Splitting a feedback budget between coefficients and the eigenbasis.

Basis bits are amortized over a coherence block of tau channels, so they are
cheap per channel use, but they only pay off once the coefficient error has
fallen below the basis error. Below the threshold rate everything goes to
the coefficients.
"""

import numpy as np

from rstc import MismatchModel, eig_hermitian, exp_correlation, optimal_split, phase_threshold
from rstc.mismatch import e2e_model
from rstc.ratesplit import effective_rate

n = 64
_, lam = eig_hermitian(exp_correlation(n, 0.9))
for tau in (1, 10, 100):
    model = MismatchModel(n, p=8, tau=tau, c_n=0.9)
    th = phase_threshold(lam, model)
    print(f"tau={tau:3d}: threshold {th.rate:.4f} bits/dim (closed form {th.closed_form:.4f})")

model = MismatchModel(n, p=8, tau=10, c_n=0.9)
print(f"\n{'R':>5} {'r_q':>7} {'r_0':>8} {'regime':>8} {'D_E2E':>9} {'all to coeffs':>13}")
for r in np.linspace(0.0, 1.5, 7):
    s = optimal_split(lam, model, r)
    d = e2e_model(lam, model, s.r_q, s.r_0)
    print(f"{r:5.2f} {s.r_q:7.4f} {s.r_0:8.5f} {s.regime:>8} {d:9.5f} "
          f"{e2e_model(lam, model, r, 0.0):13.5f}")

# refreshing the whole CSI network every block eats the budget; refreshing
# only the basis columns does not
print(f"\nfull update: {effective_rate(8.0, 32 * 2.1e6, 1024, 1e4):.4f} of 8 bits/dim left")
print(f"basis update: {effective_rate(8.0, 16 * 20, 1024, 1e4):.6f} of 8 bits/dim left")
