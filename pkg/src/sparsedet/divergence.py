"""Chi-square divergence calculators and detection-boundary curves.

The lower-bound argument reduces to moment generating functions of two
overlap statistics of the least-favorable prior. With ``I`` and ``I'``
independent uniform ``m``-subsets of ``[p]``,

* ``H = |I & I'|`` is Hypergeometric(p, m, m);
* ``G_H`` is a sum of ``H`` independent Rademacher signs.

:func:`mgf_h_exact` and :func:`mgf_gh_exact` evaluate ``E exp(lam H^2)`` and
``E exp(t G_H^2)`` exactly, in log space. :func:`chi2_prior_exact` evaluates
the prior's chi-square divergence itself, and :func:`chi2_upper_bound_cs` the
Cauchy-Schwarz bound ``sqrt(A B) - 1`` built from the two MGFs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import BudgetExceededError, InvalidInputError
from .matrix import as_matrix, spectral_norm
from .priors import SignalSpec
from .rng import as_seed

MGF_CAP = 64  # largest m for the exact MGF sums
PERMUTATION_EXACT_MAX = 8
_EXP_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class Chi2Estimate:
    """A chi-square divergence (or MGF) value.

    ``method`` is ``"exact_enumeration"`` or ``"monte_carlo(<reps>)"``;
    ``std_error`` is 0 for exact values. ``overflow`` is set when some
    sampled exponent left the float range, in which case ``value`` is inf.
    """

    value: float
    std_error: float
    method: str
    overflow: bool = False


# ----------------------------------------------------------------------------
# overlap distributions
# ----------------------------------------------------------------------------

def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _check_pm(p, m):
    if not 1 <= m <= p:
        raise InvalidInputError(f"need 1 <= m <= p, got m={m}, p={p}")
    if m > MGF_CAP:
        raise BudgetExceededError(f"exact MGF capped at m <= {MGF_CAP}, got m={m}")


def hypergeom_logpmf(p: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Support and log pmf of ``|I & I'|`` for independent uniform ``m``-subsets of ``[p]``."""
    h = np.arange(max(0, 2 * m - p), m + 1)
    logpmf = _log_comb(m, h) + _log_comb(p - m, m - h) - _log_comb(p, m)
    return h, logpmf


def mgf_h_exact(p: int, m: int, lam: float) -> float:
    """``E exp(lam * H^2)`` with ``H ~ Hypergeometric(p, m, m)``."""
    _check_pm(p, m)
    if lam == 0:
        return 1.0
    h, logpmf = hypergeom_logpmf(p, m)
    return float(np.exp(logsumexp(logpmf + lam * h.astype(float) ** 2)))


def mgf_gh_exact(p: int, m: int, t: float) -> float:
    """``E exp(t * G_H^2)``: ``G_H`` is a Rademacher sum of Hypergeometric(p, m, m) length.

    Given ``H = h``, ``G_H = 2a - h`` with ``a ~ Binomial(h, 1/2)``.
    """
    _check_pm(p, m)
    if t < 0:
        raise InvalidInputError("t must be nonnegative")
    if t == 0:
        return 1.0
    h, logpmf = hypergeom_logpmf(p, m)
    terms = []
    for hh, lw in zip(h, logpmf):
        a = np.arange(hh + 1)
        terms.append(lw + _log_comb(hh, a) - hh * math.log(2.0) + t * (2.0 * a - hh) ** 2)
    return float(np.exp(logsumexp(np.concatenate(terms))))


def chi2_prior_exact(p: int, m: int, k: int, t: float) -> Chi2Estimate:
    """Exact chi-square divergence of the least-favorable prior with amplitude ``t``.

    Conditionally on the overlap ``h`` and on ``a`` agreeing sign products,
    the Bernoulli products ``b_ij * b'_ij`` are i.i.d. Bernoulli(q), q = (k/m)^2,
    so ``E exp(<M, M'>) = E[(1 + q(e^s - 1))^(a^2 + (h-a)^2) (1 + q(e^-s - 1))^(2a(h-a))]``
    with ``s = t^2``.
    """
    _check_pm(p, m)
    if not 1 <= k <= m:
        raise InvalidInputError("need 1 <= k <= m")
    if t == 0:
        return Chi2Estimate(0.0, 0.0, "exact_enumeration")
    s = t * t
    q = (k / m) ** 2
    lp = math.log1p(q * math.expm1(s))
    lm = math.log1p(q * math.expm1(-s))
    h, logpmf = hypergeom_logpmf(p, m)
    terms = []
    for hh, lw in zip(h, logpmf):
        a = np.arange(hh + 1, dtype=float)
        same = a**2 + (hh - a) ** 2
        cross = 2.0 * a * (hh - a)
        terms.append(lw + _log_comb(hh, a) - hh * math.log(2.0) + same * lp + cross * lm)
    log_mgf = logsumexp(np.concatenate(terms))
    value = math.expm1(log_mgf) if log_mgf < _EXP_MAX else math.inf
    return Chi2Estimate(max(value, 0.0), 0.0, "exact_enumeration", math.isinf(value))


def chi2_upper_bound_cs(p: int, m: int, k: int, s: float) -> float:
    """``sqrt(A(m, s) B(m, s)) - 1``.

    ``A = E exp(2 k^2 sinh(s) / m^2 * G_H^2)`` and
    ``B = E exp(2 k^2 (cosh(s) - 1) / m^2 * H^2)``; the result bounds the
    prior's chi-square divergence at ``t = sqrt(s)`` from above.
    """
    if s < 0:
        raise InvalidInputError("s must be nonnegative")
    if not 1 <= k <= m:
        raise InvalidInputError("need 1 <= k <= m")
    A = mgf_gh_exact(p, m, 2.0 * k * k * math.sinh(s) / m**2)
    B = mgf_h_exact(p, m, 2.0 * k * k * (math.cosh(s) - 1.0) / m**2)
    return math.sqrt(A * B) - 1.0


# ----------------------------------------------------------------------------
# Monte Carlo chi-square
# ----------------------------------------------------------------------------

def chi2_gaussian_mixture_mc(spec: SignalSpec, reps: int, seed=None) -> Chi2Estimate:
    """Monte Carlo estimate of ``E exp(<M, M'>) - 1`` over independent prior pairs.

    Pair ``r`` uses the sub-streams ``(r, 0)`` and ``(r, 1)`` of ``seed``. The
    standard error is the jackknife standard error of the mean, which for a
    mean equals ``sd / sqrt(reps)``.
    """
    if reps < 2:
        raise InvalidInputError("reps must be at least 2")
    seed = as_seed(seed)
    ips = np.empty(reps)
    for r in range(reps):
        M = spec.draw(seed.child(r, 0))
        Mt = spec.draw(seed.child(r, 1))
        ips[r] = float(np.sum(M * Mt))
    method = f"monte_carlo({reps})"
    if np.any(ips >= _EXP_MAX):
        return Chi2Estimate(math.inf, math.inf, method, True)
    v = np.exp(ips)
    se = float(v.std(ddof=1) / math.sqrt(reps))
    return Chi2Estimate(max(float(v.mean()) - 1.0, 0.0), se, method)


# ----------------------------------------------------------------------------
# optimisation of the lower-bound amplitude
# ----------------------------------------------------------------------------

def _inv_cosh_m1(y):
    return math.acosh(1.0 + y)


def s_star_at(p: int, k: int, m: int, c: float = 0.05) -> float:
    """The amplitude ``s`` certified at a single block size ``m``.

    ``min{(cosh - 1)^-1(min(c m/k^2 log(ep/m), c p^2/(m^2 k^2))), asinh(c m/k^2 log(ep/m))}``.
    """
    if not 1 <= k <= m <= p:
        raise InvalidInputError(f"need 1 <= k <= m <= p, got k={k}, m={m}, p={p}")
    if c < 0:
        raise InvalidInputError("c must be nonnegative")
    y1 = c * m / k**2 * math.log(math.e * p / m)
    y2 = c * p**2 / (m**2 * k**2)
    return min(_inv_cosh_m1(min(y1, y2)), math.asinh(y1))


def optimize_s_star(p: int, k: int, m_grid, c: float = 0.05) -> tuple[float, int]:
    """Maximise :func:`s_star_at` over ``m_grid``; ties go to the smallest ``m``."""
    grid = sorted(set(int(m) for m in m_grid))
    if not grid:
        raise InvalidInputError("m_grid is empty")
    best_s, best_m = -1.0, None
    for m in grid:
        s = s_star_at(p, k, m, c)
        if s > best_s:
            best_s, best_m = s, m
    return best_s, best_m


# ----------------------------------------------------------------------------
# total variation, covariance, permutation
# ----------------------------------------------------------------------------

def _tv_lhs(v):
    return v * (math.log1p(v) - math.log1p(-v))


def tv_upper_from_chi2(chi2: float, tol: float = 0.0) -> float:
    """The ``v`` in ``[0, 1)`` with ``v log((1 + v) / (1 - v)) = chi2``, by bisection."""
    if not chi2 >= 0:
        raise InvalidInputError("chi2 must be nonnegative")
    if chi2 == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _tv_lhs(mid) < chi2:
            lo = mid
        else:
            hi = mid
    # pick the endpoint with the smaller residual
    return lo if abs(_tv_lhs(lo) - chi2) <= abs(_tv_lhs(hi) - chi2) or hi >= 1.0 else hi


def cov_chi2_pair_term(T, T_tilde, n: int) -> tuple[float, float]:
    """``det(I - T T')^(-n/2)`` and the surrogate ``exp((n/2) <T, T'>)``.

    Both perturbations need spectral norm below 1.
    """
    A = as_matrix(T, "T")
    B = as_matrix(T_tilde, "T_tilde")
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise InvalidInputError("T and T_tilde must be square with equal shapes")
    if n < 1:
        raise InvalidInputError("n must be positive")
    if spectral_norm(A) >= 1.0 or spectral_norm(B) >= 1.0:
        raise InvalidInputError("spectral norm of T and T_tilde must be < 1 (divergent regime)")
    sign, logdet = np.linalg.slogdet(np.eye(A.shape[0]) - A @ B)
    if sign <= 0:
        raise InvalidInputError("I - T T_tilde has nonpositive determinant")
    return _safe_exp(-0.5 * n * logdet), _safe_exp(0.5 * n * float(np.sum(A * B)))


def _safe_exp(x):
    return math.exp(x) if x < _EXP_MAX else math.inf


def _fixed_point_pmf(p):
    # rencontres numbers: P(S = l) = C(p, l) D(p - l) / p!
    D = [1, 0]
    for n in range(2, p + 1):
        D.append((n - 1) * (D[-1] + D[-2]))
    fact = math.factorial(p)
    return [math.comb(p, l) * D[p - l] / fact for l in range(p + 1)]


_PERM_CHUNK = 1000


def permutation_mgf(p: int, reps: int = 100_000, seed=None) -> Chi2Estimate:
    """``E exp(S_p)`` with ``S_p`` the number of fixed points of a uniform permutation of ``[p]``.

    Exact for ``p <= 8``; otherwise Monte Carlo in fixed chunks of 1000
    replicates, chunk ``c`` drawn from sub-stream ``c`` of ``seed``.
    """
    if p < 1 or reps < 1:
        raise InvalidInputError("p and reps must be positive")
    if p <= PERMUTATION_EXACT_MAX:
        pmf = _fixed_point_pmf(p)
        return Chi2Estimate(math.fsum(w * math.exp(l) for l, w in enumerate(pmf)), 0.0, "exact_enumeration")
    seed = as_seed(seed)
    counts = np.empty(reps)
    base = np.arange(p)
    for c, start in enumerate(range(0, reps, _PERM_CHUNK)):
        size = min(_PERM_CHUNK, reps - start)
        perms = seed.generator(c).permuted(np.broadcast_to(base, (size, p)), axis=1)
        counts[start:start + size] = np.sum(perms == base, axis=1)
    v = np.exp(counts)
    se = float(v.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.inf
    return Chi2Estimate(float(v.mean()), se, f"monte_carlo({reps})")


# ----------------------------------------------------------------------------
# boundary curves
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryPoint:
    p: int
    k: int
    lambda0: float
    lambda1: float
    clamped: bool = False
    capped: bool = False


def lambda1(p: int, k: int) -> float:
    """Detectable signal level: ``k sqrt(log p)`` for small ``k``, else ``(k p log(ep/k))^(1/4)``."""
    _check_pk(p, k)
    if k <= (p / math.log(p)) ** (1 / 3):
        return k * math.sqrt(math.log(p))
    return (k * p * math.log(math.e * p / k)) ** 0.25


def lambda0(p: int, k: int, with_e: bool = True) -> tuple[float, bool]:
    """Undetectable signal level and a flag telling whether it was clamped at 0.

    For ``k <= (p log p)^(1/3)`` this is ``k sqrt(log(e p log p / k^3))``;
    ``with_e=False`` drops the ``e`` inside the logarithm and clamps the
    result at 0 when the argument falls to 1 or below. For larger ``k`` it
    equals :func:`lambda1`.
    """
    _check_pk(p, k)
    L = math.log(p)
    if k > (p * L) ** (1 / 3):
        return (k * p * math.log(math.e * p / k)) ** 0.25, False
    arg = (math.e if with_e else 1.0) * p * L / k**3
    if arg <= 1.0:
        return 0.0, True
    return k * math.sqrt(math.log(arg)), False


def beta_star(alpha: float) -> float:
    """Critical exponent of the detectable norm ``p^beta`` at sparsity ``k = p^alpha``."""
    if not 0 <= alpha <= 1:
        raise InvalidInputError("alpha must lie in [0, 1]")
    return alpha if alpha <= 1 / 3 else (1 + alpha) / 4


def boundary_curves(p: int, k: int, with_e: bool = True, cap: bool = True) -> BoundaryPoint:
    """Both boundary levels at ``(p, k)``.

    Between ``(p / log p)^(1/3)`` and ``(p log p)^(1/3)`` the small-``k`` form of
    ``lambda0`` can exceed ``lambda1`` by up to about 20%; with ``cap`` it is
    lowered to ``lambda1`` and ``capped`` is set.
    """
    lo, clamped = lambda0(p, k, with_e)
    hi = lambda1(p, k)
    capped = cap and lo > hi
    return BoundaryPoint(p, k, min(lo, hi) if cap else lo, hi, clamped, capped)


def _check_pk(p, k):
    if p < 2 or not 1 <= k <= p:
        raise InvalidInputError(f"need p >= 2 and 1 <= k <= p, got p={p}, k={k}")


# ----------------------------------------------------------------------------
# covariance lower-bound advisory
# ----------------------------------------------------------------------------

def cov_lower_bound_advisory(n: int, p: int, k: int, s: float, m: int, c: float = 1.0) -> dict:
    """Evaluate the sample-size conditions of the covariance lower bound with constant ``c``.

    Returns each condition's left side, right side and whether it holds. The
    true constants are unknown, so this is advice, not a verdict.
    """
    if min(n, p, k, m) < 1:
        raise InvalidInputError("n, p, k and m must be positive")
    lm = math.log(m) if m > 1 else 0.0
    denom = math.log(math.e * lm / k) if lm > 0 else 0.0
    rho = max(k, lm / denom) if denom > 0 else float(k)
    checks = {
        "overlap_sum": (k**4 * s**2 / (m**2 * n), c / m * math.log(math.e * p / m)),
        "row_noise": (64 * k**2 * s**2 / (m * n), c / m),
        "residual": (rho**2 * s**2 / n, c),
        "residual_overlap": (m**2 * rho**2 * s**2 / (n * p), c),
    }
    return {name: {"lhs": lhs, "rhs": rhs, "ok": lhs <= rhs} for name, (lhs, rhs) in checks.items()}
