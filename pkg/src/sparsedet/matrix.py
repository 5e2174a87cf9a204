"""Dense matrix kernels.

Matrices are plain 2-D float ``numpy`` arrays; index sets are sorted integer
arrays. Functions validate their input (finite, two-dimensional) and raise
:class:`~sparsedet.errors.InvalidInputError` otherwise.
"""
from __future__ import annotations

import os

import numpy as np

from .errors import ConvergenceError, InvalidInputError, UndefinedValueError

#: Below this many rows or columns the spectral norm is taken from a full SVD.
DENSE_SVD_CUTOFF = 256
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


def as_matrix(M, name="M") -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def as_index_set(I, p: int, name="I") -> np.ndarray:
    """Validate and return a strictly increasing index array into ``range(p)``."""
    idx = np.asarray(I, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= p):
        raise InvalidInputError(f"{name} has indices outside [0, {p})")
    if np.any(np.diff(idx) <= 0):
        raise InvalidInputError(f"{name} must be strictly increasing")
    return idx


def power_iteration_norm(M, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> float:
    """Largest singular value of ``M`` by power iteration on ``M.T @ M``.

    The start vector is the normalised all-ones vector. If it lies in the null
    space of ``M`` it is replaced by a fixed pseudo-random vector, so the result
    is a deterministic function of ``M``.

    Raises
    ------
    ConvergenceError
        If the relative change of the estimate stays above ``tol`` after
        ``max_iter`` iterations. The last estimate is attached.
    """
    A = as_matrix(M)
    if tol <= 0 or max_iter < 1:
        raise InvalidInputError("tol must be > 0 and max_iter >= 1")
    n = A.shape[1]
    if A.size == 0 or not np.any(A):
        return 0.0
    x = np.full(n, 1.0 / np.sqrt(n))
    y = A @ x
    if not np.any(y):
        x = np.random.default_rng(0x5EED).standard_normal(n)
        x /= np.linalg.norm(x)
        y = A @ x
    sigma2 = float(y @ y)
    for _ in range(max_iter):
        z = A.T @ y
        nz = np.linalg.norm(z)
        if nz == 0.0:
            # stagnated on the null space after rounding; restart from a perturbed vector
            x = x + 1e-3 * np.random.default_rng(0xF00D).standard_normal(n)
            x /= np.linalg.norm(x)
            y = A @ x
            continue
        x = z / nz
        y = A @ x
        new = float(y @ y)
        if abs(new - sigma2) <= tol * new:
            return float(np.sqrt(new))
        sigma2 = new
    raise ConvergenceError(
        f"power iteration did not reach tol={tol} in {max_iter} iterations", float(np.sqrt(sigma2))
    )


def spectral_norm(M, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> float:
    """Largest singular value ``||M||_2``.

    Small matrices go through a full SVD; larger ones use
    :func:`power_iteration_norm`.
    """
    A = as_matrix(M)
    if A.size == 0:
        return 0.0
    if min(A.shape) == 1:
        return float(np.linalg.norm(A))
    if min(A.shape) <= DENSE_SVD_CUTOFF:
        return float(np.linalg.svd(A, compute_uv=False)[0])
    return power_iteration_norm(A, tol, max_iter)


def frobenius_norm_sq(M) -> float:
    A = as_matrix(M)
    return float(np.sum(A * A))


def stable_rank(M) -> float:
    """``||M||_F^2 / ||M||_2^2``, a number between 1 and ``rank(M)``."""
    A = as_matrix(M)
    op = spectral_norm(A)
    if op == 0.0:
        raise UndefinedValueError("stable rank of the zero matrix is undefined")
    return frobenius_norm_sq(A) / op**2


def induced_norms(M) -> tuple[float, float]:
    """Return ``(||M||_1, ||M||_inf)``: max absolute column sum and max absolute row sum."""
    A = np.abs(as_matrix(M))
    if A.size == 0:
        return 0.0, 0.0
    return float(A.sum(axis=0).max()), float(A.sum(axis=1).max())


def is_k_sparse(M, k: int, threshold: float = 0.0) -> bool:
    """True iff every row and every column has at most ``k`` nonzeros.

    An entry counts as nonzero when ``|M_ij| > threshold``; the default treats
    only exact zeros as zero.
    """
    A = as_matrix(M)
    nz = np.abs(A) > threshold
    return bool(nz.sum(axis=1).max(initial=0) <= k and nz.sum(axis=0).max(initial=0) <= k)


def max_line_count(M, threshold: float = 0.0) -> int:
    """Largest number of nonzeros in any row or column, i.e. the smallest valid sparsity budget."""
    nz = np.abs(as_matrix(M)) > threshold
    return int(max(nz.sum(axis=1).max(initial=0), nz.sum(axis=0).max(initial=0)))


def submatrix(M, I, J) -> np.ndarray:
    A = as_matrix(M)
    I = as_index_set(I, A.shape[0], "I")
    J = as_index_set(J, A.shape[1], "J")
    return A[np.ix_(I, J)]


def read_matrix(path) -> np.ndarray:
    """Read the text fixture format: a ``rows cols`` header, then one row per line."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise InvalidInputError(f"{path}: first line must be 'rows cols'")
        rows, cols = (int(v) for v in header)
        body = [line.split() for line in fh if line.strip()]
    if len(body) != rows or any(len(r) != cols for r in body):
        raise InvalidInputError(f"{path}: expected {rows}x{cols} entries")
    A = np.array(body, dtype=float).reshape(rows, cols)
    return as_matrix(A)


def format_matrix(M) -> str:
    A = as_matrix(M)
    lines = [f"{A.shape[0]} {A.shape[1]}"]
    lines += [" ".join(format(float(v), ".17g") for v in row) for row in A]
    return "\n".join(lines) + "\n"


def write_matrix(M, path) -> None:
    text = format_matrix(M)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
