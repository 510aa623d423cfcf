"""
Noise stability two ways
========================

For a pair of sets the noise stability is P(X in A, Y in B) with (X, Y)
standard Gaussians of correlation rho. Here it is computed from Hermite
coefficients (with a rigorous tail bound) and by seeded Monte Carlo.
"""

# %%
from symstab import Ball, Ellipse2D, Strip, stability_mc, stability_series
from symstab.noise import quadratic_remainder

A, B = Ellipse2D(2.5, 2.31394), Strip(2, 1.90999)
for rho in (0.05, -0.2):
    s = stability_series(A, B, rho, degree=20)
    m = stability_mc(A, B, rho, samples=1_000_000, seed=0)
    print(f"rho={rho:+.2f}  series={s.value:.6f} (tail<={s.tail_bound:.1e})  "
          f"MC={m.value:.6f} +- {m.std_error:.1e}")

# %%
# For small rho, S_rho(A, A) - gamma(A)^2 is quadratic in rho, and its
# curvature is twice F(A) plus the squared mixed moments. The cubic remainder
# is far below |rho|^3.
for rho in (0.05, 0.1, 0.2):
    q = quadratic_remainder(Ball(2, 2.4), rho)
    print(f"rho={rho}: remainder={q.remainder:.3e}  bound={q.bound:.3e}")
