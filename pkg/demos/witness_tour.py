"""Small submatrices that carry a constant share of the operator norm.

Draws sparse matrices with low stable rank and runs the witness search at a
small and at the default oversampling constant. With ``C_w = 8`` the sample
covers the whole support of these 64 x 64 draws; with ``C_w = 0.05`` the
witness is a fraction of it and still keeps the norm.
"""
import math

import numpy as np

from sparsedet import find_witness, gen_permutation, sparse_corner_draw, spectral_norm, stable_rank

p, m, k = 128, 64, 8
print(f"{'draw':>4} {'sr':>6} {'k r log r':>9} | {'C_w':>5} {'|I|':>4} {'|J|':>4} {'ratio':>6}")
for r in range(6):
    M = sparse_corner_draw(p, m, k, seed=(1, r))
    sr = stable_rank(M)
    for c_w in (0.05, 8.0):
        rep = find_witness(M, k, C_w=c_w, seed=r)
        print(f"{r:4d} {sr:6.2f} {k * sr * math.log(max(sr, 2)):9.1f} | {c_w:5.2f} {len(rep.I):4d}"
              f" {len(rep.J):4d} {rep.ratio:6.3f}")

# a planted 8 x 8 block over a faint permutation background
M = 0.05 * gen_permutation(p, seed=0)
M[:8, :] = 0.0
M[:, :8] = 0.0
M[:8, :8] = 1.0
rep = find_witness(M, k, seed=0)
print("planted block:", rep.I.tolist(), rep.J.tolist(), f"ratio {rep.ratio:.3f}",
      f"of ||M|| = {spectral_norm(M):.2f}")
