"""Monte Carlo rate-distortion sweep and the matching command line.

The harness plans each rate point (split, whole basis bits per column),
simulates it block by block and reports the analytic and measured terms.
The same sweep runs from the shell with

    python -m rstc sweep --nt 2 --nc 2 --rates 0.25,0.5,1,2 --trials 4000 --tau 2000 \
        --max-bits-per-column 16

and a binary channel dump can replace the synthetic source via ``rstc ingest``.
"""

import math

from rstc import harness

# the basis model assumes a small chordal error; 16 bits per column at N = 4
# keeps it near 0.02
cfg = harness.make_config(None, nt=2, nc=2, rates=[0.25, 0.5, 1.0, 2.0], trials=4000,
                          tau=2000, max_bits_per_column=16, seed=1)
print(f"{'R':>5} {'r_0':>8} {'B':>3} {'d_c^2':>6} {'model':>8} {'E2E':>8} {'T1':>8} {'T2':>8} "
      f"{'D0':>8} {'T3':>9}")
for rec in harness.run_rd_sweep(cfg):
    print(f"{rec.r_total:5.2f} {rec.r_0:8.5f} {rec.bits_per_column:3d} {rec.mean_chordal_sq:6.3f} "
          f"{rec.analytic_e2e:8.5f} {rec.empirical_e2e:8.5f} {rec.empirical_t1:8.5f} "
          f"{rec.empirical_t2:8.5f} {rec.analytic_d0:8.5f} {rec.empirical_t3:+9.5f}")

# perfect basis: the gap to the Gaussian R-D bound is the scalar quantizer's
perfect = harness.make_config(None, nt=8, nc=8, basis="perfect", rates=[0.2, 0.6, 1.0],
                              trials=4000, seed=2)
for rec in harness.run_rd_sweep(perfect):
    print(f"perfect basis R={rec.r_total}: "
          f"{10 * math.log10(rec.empirical_e2e / rec.analytic_dq):.2f} dB above D_q")

print("structured decoder for 32 x 32:", harness.structured_complexity(32, 32))
