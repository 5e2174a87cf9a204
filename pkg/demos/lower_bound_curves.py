"""Chi-square bounds for the least-favorable prior and the boundary curves.

Prints the exact divergence next to its Cauchy-Schwarz bound, the optimised
amplitude ``s*`` and the detectable/undetectable levels for a few ``(p, k)``.
"""
import math

from sparsedet import divergence as dv

p, m, k = 30, 6, 2
print(f"p={p} m={m} k={k}")
print(f"{'s':>5} {'exact chi2':>11} {'CS bound':>10} {'TV bound':>9}")
for s in (0.05, 0.1, 0.2, 0.4, 0.8):
    exact = dv.chi2_prior_exact(p, m, k, math.sqrt(s)).value
    cs = dv.chi2_upper_bound_cs(p, m, k, s)
    print(f"{s:5.2f} {exact:11.5f} {cs:10.5f} {dv.tv_upper_from_chi2(exact):9.4f}")

for p in (2**10, 2**14):
    for k in (2, 8, 64):
        s, m_star = dv.optimize_s_star(p, k, range(k, min(p, 4096) + 1))
        b = dv.boundary_curves(p, k)
        print(f"p={p:6d} k={k:3d}  s*={s:.4f} at m={m_star:5d}  lambda0={b.lambda0:8.3f}"
              f"  lambda1={b.lambda1:8.3f}{'  (capped)' if b.capped else ''}")

print("fixed points of a uniform permutation, E exp(S_p):")
for p in (1, 2, 5, 8, 50):
    est = dv.permutation_mgf(p, 20_000, seed=0)
    print(f"  p={p:3d} {est.value:.4f} ({est.method})")
print(f"  limit e^(e-1) = {math.exp(math.e - 1):.4f}")
