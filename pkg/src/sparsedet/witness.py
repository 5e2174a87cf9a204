"""Small submatrices that carry a constant fraction of the spectral norm.

For a ``k``-sparse matrix ``M`` with stable rank ``r`` there are index sets of
size ``O(k r)`` and ``O(k r log r)`` whose submatrix keeps at least 1/8 of
``||M||_2``. :func:`find_witness` constructs them:

1. split off the rows and columns with large l2 norm (:func:`energy_split`);
   the remaining block has small l1/linf norms, hence small spectral norm;
2. the heavy-row block ``X = M[I0, :]`` or the heavy-column block
   ``Y = M[:, J0]`` keeps a quarter of ``||M||_2``;
3. sample ``d`` rows of that block with probability proportional to their
   squared norm (:func:`rv_row_sample`); the support of the sampled block's
   leading right singular vector is the small index set on the other side.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UndefinedValueError
from .matrix import as_matrix, is_k_sparse, spectral_norm, stable_rank
from .priors import gen_bernoulli_block
from .rng import as_seed

SUCCESS_RATIO = 1.0 / 8.0


@dataclass
class WitnessReport:
    I: np.ndarray
    J: np.ndarray
    ratio: float
    r: float
    d: int
    restarts_used: int
    side: str
    success: bool
    residual_norm: float
    tau: float

    def to_record(self) -> dict:
        return {
            "I": self.I.tolist(),
            "J": self.J.tolist(),
            "ratio": self.ratio,
            "r": self.r,
            "d": self.d,
            "restarts_used": self.restarts_used,
            "side": self.side,
            "success": self.success,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def energy_split(M, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Rows and columns whose l2 norm is at least ``tau``."""
    if tau <= 0:
        raise InvalidInputError("tau must be positive")
    A = as_matrix(M)
    I0 = np.flatnonzero(np.linalg.norm(A, axis=1) >= tau)
    J0 = np.flatnonzero(np.linalg.norm(A, axis=0) >= tau)
    return I0, J0


def rv_row_sample(X, d: int, seed=None) -> np.ndarray:
    """Norm-proportional row sample, rescaled so that ``Xs.T @ Xs`` is unbiased for ``X.T @ X``.

    Row ``i`` is drawn with probability ``||x_i||^2 / ||X||_F^2`` and rescaled
    to norm ``||X||_F``; the ``d`` draws are stacked and divided by ``sqrt(d)``.
    """
    A = as_matrix(X, "X")
    if d < 1:
        raise InvalidInputError("d must be positive")
    row_sq = np.sum(A * A, axis=1)
    fro2 = row_sq.sum()
    if fro2 == 0.0:
        raise UndefinedValueError("cannot sample rows of the zero matrix")
    probs = row_sq / fro2
    idx = as_seed(seed).generator().choice(A.shape[0], size=d, p=probs)
    scale = np.sqrt(fro2 / row_sq[idx]) / np.sqrt(d)
    return A[idx] * scale[:, None]


def _sample_support(block, d, rng_seed):
    """Support of the leading right singular vector of the sampled rows."""
    Xs = rv_row_sample(block, d, rng_seed)
    cols = np.flatnonzero(np.any(Xs != 0.0, axis=0))
    v = np.linalg.svd(Xs[:, cols], full_matrices=False)[2][0]
    keep = np.abs(v) > 1e-12 * np.abs(v).max()
    return cols[keep]


def find_witness(M, k: int, C_w: float = 8.0, restarts: int = 10, seed=None) -> WitnessReport:
    """Construct index sets ``(I, J)`` with ``||M_IJ||_2 >= ||M||_2 / 8``.

    Sampling is retried with fresh sub-streams of ``seed`` until the ratio
    reaches 1/8 or ``restarts`` attempts are used. The best attempt is
    returned either way; ``success`` says whether it met the bound. The first
    attempt reaching the bound wins, otherwise the highest ratio (earliest on
    ties).
    """
    A = as_matrix(M)
    if not np.any(A):
        raise InvalidInputError("witness search needs a nonzero matrix")
    if not is_k_sparse(A, k):
        raise InvalidInputError(f"matrix is not {k}-sparse")
    if restarts < 1:
        raise InvalidInputError("restarts must be positive")

    op = spectral_norm(A)
    tau = op / (2.0 * math.sqrt(k))
    I0, J0 = energy_split(A, tau)
    rest_rows = np.setdiff1d(np.arange(A.shape[0]), I0)
    rest_cols = np.setdiff1d(np.arange(A.shape[1]), J0)
    residual = spectral_norm(A[np.ix_(rest_rows, rest_cols)]) if rest_rows.size and rest_cols.size else 0.0

    X = A[I0, :]
    Y = A[:, J0]
    nx = spectral_norm(X) if I0.size else 0.0
    ny = spectral_norm(Y) if J0.size else 0.0
    # row-heavy wins ties; the column-heavy block is handled through its transpose
    if nx >= ny:
        side, fixed, block = "row-heavy", I0, X
    else:
        side, fixed, block = "column-heavy", J0, Y.T

    r = stable_rank(block)
    d = max(1, math.ceil(C_w * r * math.log(max(r, 2.0))))

    seed = as_seed(seed)
    best = None
    for attempt in range(restarts):
        sampled = _sample_support(block, d, seed.child(attempt))
        I, J = (fixed, sampled) if side == "row-heavy" else (sampled, fixed)
        ratio = spectral_norm(A[np.ix_(I, J)]) / op if I.size and J.size else 0.0
        if best is None or ratio > best[0]:
            best = (ratio, I, J, attempt + 1)
        if ratio >= SUCCESS_RATIO:
            break
    ratio, I, J, used = best
    return WitnessReport(I, J, ratio, r, d, used if ratio >= SUCCESS_RATIO else restarts, side,
                         ratio >= SUCCESS_RATIO, residual, tau)


def sparse_corner_draw(p: int, m: int, k: int, seed=None, max_tries: int = 10_000) -> np.ndarray:
    """A ``k``-sparse draw of the ``m x m`` Bernoulli(k / 2m) block embedded in ``p x p``.

    Raw draws are rejected until every row and column has at most ``k``
    nonzeros, i.e. the block is sampled conditionally on being ``k``-sparse.
    """
    q = k / (2.0 * m)
    seed = as_seed(seed)
    for attempt in range(max_tries):
        M = gen_bernoulli_block(p, m, q, seed.child(attempt))
        if np.any(M) and is_k_sparse(M, k):
            return M
    raise UndefinedValueError(f"no {k}-sparse draw in {max_tries} tries")


def calibrate_c_w(grid, p: int = 128, m: int = 64, k: int = 8, draws: int = 100,
                  restarts: int = 10, target: float = 0.95, seed=0) -> tuple[float | None, dict]:
    """Smallest ``C_w`` in ``grid`` whose success rate on the ensemble reaches ``target``.

    Returns ``(c_w, rates)`` where ``rates`` maps every grid value to its
    success rate; ``c_w`` is None when no grid value qualifies.
    """
    seed = as_seed(seed)
    mats = [sparse_corner_draw(p, m, k, seed.child(0, i)) for i in range(draws)]
    rates = {}
    for c in sorted(grid):
        hits = sum(find_witness(M, k, c, restarts, seed.child(1, i)).success for i, M in enumerate(mats))
        rates[c] = hits / draws
    ok = [c for c in sorted(rates) if rates[c] >= target]
    return (ok[0] if ok else None), rates
