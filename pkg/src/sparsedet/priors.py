"""Signal, prior and noise generators.

All generators take an :class:`~sparsedet.rng.RngSeed` (or anything
:func:`~sparsedet.rng.as_seed` accepts) and are pure functions of it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InvalidInputError
from .matrix import as_matrix, write_matrix
from .rng import as_seed


@dataclass(frozen=True)
class PriorSample:
    """One draw ``M = t * U_I B U_I`` from the least-favorable prior.

    The components are kept so that inner products between draws and the
    sparsity / norm events can be checked per draw. ``bernoulli`` is the full
    ``p x p`` 0/1 matrix ``B``; only its ``support x support`` block matters.
    """

    matrix: np.ndarray
    support: np.ndarray
    signs: np.ndarray
    bernoulli: np.ndarray
    amplitude: float
    rate: float

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    def block(self) -> np.ndarray:
        """The ``m x m`` Bernoulli block ``B_II``."""
        return self.bernoulli[np.ix_(self.support, self.support)]

    def reconstruct(self) -> np.ndarray:
        d = np.zeros(self.p)
        d[self.support] = self.signs[self.support]
        return self.amplitude * (d[:, None] * self.bernoulli * d[None, :])

    def metadata(self) -> dict:
        return {
            "I": self.support.tolist(),
            "u": self.signs.astype(int).tolist(),
            "t": self.amplitude,
            "rate": self.rate,
        }

    def dump(self, path) -> None:
        """Write the matrix in the text fixture format plus a ``.json`` sidecar."""
        write_matrix(self.matrix, path)
        with open(f"{path}.json", "w") as fh:
            json.dump(self.metadata(), fh, sort_keys=True)


_KINDS = ("least_favorable", "block", "permutation", "zero")


@dataclass(frozen=True)
class SignalSpec:
    """Declarative signal description.

    ``params`` holds ``m``, ``k``, ``t`` for ``least_favorable`` and ``k``,
    ``theta`` for ``block``. ``permutation`` takes an optional ``scale``.
    """

    kind: str
    p: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidInputError(f"unknown signal kind {self.kind!r}; expected one of {_KINDS}")
        if self.p < 1:
            raise InvalidInputError("p must be positive")
        for key in ("m", "k"):
            if key in self.params and not (1 <= self.params[key] <= self.p):
                raise InvalidInputError(f"{key} must lie in [1, p]")
        for key in ("t", "theta", "scale"):
            if self.params.get(key, 0) < 0:
                raise InvalidInputError(f"{key} must be nonnegative")
        if self.kind == "least_favorable" and not {"m", "k", "t"} <= set(self.params):
            raise InvalidInputError("least_favorable needs m, k and t")
        if self.kind == "block" and not {"k", "theta"} <= set(self.params):
            raise InvalidInputError("block needs k and theta")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "SignalSpec":
        d = dict(d)
        try:
            kind, p = d.pop("kind"), int(d.pop("p"))
        except KeyError as exc:
            raise InvalidInputError(f"signal spec is missing field {exc}") from None
        return cls(kind, p, d)

    def draw(self, seed=None) -> np.ndarray:
        """Sample (or return) the mean matrix described by this spec."""
        if self.kind == "zero":
            return np.zeros((self.p, self.p))
        if self.kind == "block":
            return gen_block_signal(self.p, self.params["k"], self.params["theta"])
        if self.kind == "permutation":
            return self.params.get("scale", 1.0) * gen_permutation(self.p, seed)
        P = self.params
        return gen_prior_sample(self.p, P["m"], P["k"], P["t"], seed).matrix


def gen_prior_sample(p: int, m: int, k: int, t: float, seed=None) -> PriorSample:
    """Draw from the least-favorable prior.

    ``I`` is a uniform ``m``-subset of ``range(p)``, ``u`` are i.i.d. Rademacher
    signs and ``B`` has i.i.d. Bernoulli(k/m) entries; the matrix is
    ``m_ij = t * 1{i in I} 1{j in I} u_i u_j b_ij``.
    """
    if not (1 <= k <= m <= p):
        raise InvalidInputError(f"need 1 <= k <= m <= p, got k={k}, m={m}, p={p}")
    if t < 0:
        raise InvalidInputError("t must be nonnegative")
    rng = as_seed(seed).generator()
    support = np.sort(rng.choice(p, size=m, replace=False))
    signs = rng.choice(np.array([-1.0, 1.0]), size=p)
    rate = k / m
    bern = (rng.random((p, p)) < rate).astype(float)
    d = np.zeros(p)
    d[support] = signs[support]
    matrix = t * (d[:, None] * bern * d[None, :])
    return PriorSample(matrix, support, signs, bern, float(t), rate)


def preset_m_small_k(p: int) -> int:
    """Block size ``(p^2 / log p)^(1/3)`` used for the highly sparse regime."""
    return max(1, min(p, round((p**2 / math.log(p)) ** (1 / 3))))


def preset_m_large_k(p: int, k: int, c: float = 0.05) -> int:
    """Block size ``sqrt(p k / (4 c^2 log(e p / k)))`` for the moderately sparse regime."""
    m = math.sqrt(p * k / (4 * c**2 * math.log(math.e * p / k)))
    return max(k, min(p, round(m)))


def symmetrize(M) -> np.ndarray:
    """``[[0, M], [M^T, 0]]``; same spectral norm, inner products double."""
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError("symmetrize expects a square matrix")
    p = A.shape[0]
    out = np.zeros((2 * p, 2 * p))
    out[:p, p:] = A
    out[p:, :p] = A.T
    return out


def gen_block_signal(p: int, k: int, theta: float) -> np.ndarray:
    """``theta`` on the top-left ``k x k`` block, zero elsewhere."""
    if not 1 <= k <= p:
        raise InvalidInputError("need 1 <= k <= p")
    if theta < 0:
        raise InvalidInputError("theta must be nonnegative")
    M = np.zeros((p, p))
    M[:k, :k] = theta
    return M


def gen_permutation(p: int, seed=None) -> np.ndarray:
    if p < 1:
        raise InvalidInputError("p must be positive")
    perm = as_seed(seed).generator().permutation(p)
    P = np.zeros((p, p))
    P[np.arange(p), perm] = 1.0
    return P


def gen_bernoulli_block(p: int, m: int, q: float, seed=None) -> np.ndarray:
    """An ``m x m`` block of i.i.d. Bernoulli(q) entries in the top-left of a ``p x p`` zero matrix."""
    if not 1 <= m <= p or not 0 <= q <= 1:
        raise InvalidInputError("need 1 <= m <= p and 0 <= q <= 1")
    M = np.zeros((p, p))
    M[:m, :m] = as_seed(seed).generator().random((m, m)) < q
    return M


def add_gaussian_noise(M, seed=None) -> np.ndarray:
    """``X = M + Z`` with ``Z`` i.i.d. standard normal."""
    A = as_matrix(M)
    return A + as_seed(seed).generator().standard_normal(A.shape)


def sample_gaussian_data(Sigma, n: int, seed=None, pivot_tol: float = 1e-12) -> np.ndarray:
    """``n`` i.i.d. rows from ``N(0, Sigma)``, returned as an ``n x p`` array.

    ``Sigma`` is factored with a symmetric eigendecomposition and rows are
    ``z @ Sigma^(1/2)``. Eigenvalues below ``-pivot_tol * max(1, ||Sigma||)``
    mean ``Sigma`` is not positive semidefinite.
    """
    S = as_matrix(Sigma, "Sigma")
    p = S.shape[0]
    if S.shape != (p, p) or not np.allclose(S, S.T, atol=1e-12, rtol=0):
        raise InvalidInputError("Sigma must be square and symmetric")
    if n < 0:
        raise InvalidInputError("n must be nonnegative")
    w, V = linalg.eigh(S)
    floor = -pivot_tol * max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.size and w[0] < floor:
        i = int(np.argmin(w))
        raise InvalidInputError(f"Sigma is not positive semidefinite: eigenvalue {w[i]:.3e} at pivot {i}")
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    Z = as_seed(seed).generator().standard_normal((n, p))
    return Z @ root
