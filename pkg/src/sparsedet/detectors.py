"""Hypothesis tests for sparse matrices.

Mean model, ``X = M + Z`` with ``Z`` standard Gaussian:

* :func:`mean_threshold_test` -- spectral norm of the entrywise-thresholded
  observation (highly sparse regime);
* :func:`mean_chi2_scan_test` -- Frobenius chi-square stage OR scan stage
  (moderately sparse regime).

Covariance model, rows of ``data`` i.i.d. ``N(0, Sigma)``:

* :func:`cov_threshold_test` and :func:`cov_chi2_scan_test`, the analogues
  built on the sample covariance and the U-statistic :func:`q_statistic`.

Every test returns a :class:`TestReport`, whose decision is re-derivable from
the statistics and thresholds it stores.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .matrix import as_matrix, spectral_norm
from .rng import as_seed
from .scan import ScanConfig, scan_statistic

# statistic name -> threshold name it is compared against
_PAIRS = {
    "thresholded_spectral": "lambda_cut",
    "frob_chi2": "s",
    "q_stat": "s",
    "scan_value": "t",
}
_STAGE = {"thresholded_spectral": "threshold", "frob_chi2": "chi2", "q_stat": "chi2", "scan_value": "scan"}


@dataclass
class TestReport:
    """Outcome of one test.

    A test rejects iff some statistic is at least its paired threshold
    (``thresholded_spectral >= lambda_cut``, ``frob_chi2 >= s``,
    ``q_stat >= s``, ``scan_value >= t``).
    """

    __test__ = False  # keep pytest from collecting this class

    decision: str
    statistics: dict
    thresholds: dict
    fired_stage: str | None = None
    witness: tuple | None = None
    approximate: bool = False
    warnings: list = field(default_factory=list)

    @property
    def reject(self) -> bool:
        return self.decision == "reject"

    @classmethod
    def from_values(cls, statistics, thresholds, **kw) -> "TestReport":
        fired = _decide(statistics, thresholds)
        return cls("reject" if fired else "accept", dict(statistics), dict(thresholds), fired, **kw)

    def rederive(self) -> str:
        return "reject" if _decide(self.statistics, self.thresholds) else "accept"

    def to_record(self) -> dict:
        """Flat record with stable field names (``stat.*``, ``thr.*``, ``scan.*``)."""
        rec = {"decision": self.decision}
        rec.update({f"stat.{k}": v for k, v in sorted(self.statistics.items())})
        rec.update({f"thr.{k}": v for k, v in sorted(self.thresholds.items())})
        rec["fired_stage"] = self.fired_stage or ""
        I, J = self.witness if self.witness is not None else ((), ())
        rec["scan.I"] = " ".join(str(int(i)) for i in I)
        rec["scan.J"] = " ".join(str(int(j)) for j in J)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=False)


def _decide(statistics, thresholds):
    for name, value in statistics.items():
        thr = _PAIRS.get(name)
        if thr in thresholds and value >= thresholds[thr]:
            return _STAGE[name]
    return None


def _check_eps(epsilon, upper=1.0):
    if not 0 < epsilon < upper:
        raise InvalidInputError(f"epsilon must lie in (0, {upper}), got {epsilon}")


# ----------------------------------------------------------------------------
# mean model
# ----------------------------------------------------------------------------

def threshold_estimate(X, tau: float) -> np.ndarray:
    """Keep entries with ``|X_ij| >= tau``, zero the rest."""
    if tau < 0:
        raise InvalidInputError("tau must be nonnegative")
    A = as_matrix(X, "X")
    return np.where(np.abs(A) >= tau, A, 0.0)


def threshold_level(p: int, epsilon: float) -> float:
    """``sqrt(2 log(4 p^2 / epsilon))``: the noise level exceeded anywhere with probability <= epsilon / 2."""
    _check_eps(epsilon)
    return math.sqrt(2.0 * math.log(4.0 * p * p / epsilon))


def mean_threshold_test(X, k: int, epsilon: float, cut_factor: float = 1.0) -> TestReport:
    """Threshold at ``tau = sqrt(2 log(4p^2/eps))`` and compare ``||X^Th||_2`` with ``cut_factor * k * tau``.

    On the event ``max |Z_ij| < tau`` (probability >= 1 - eps/2) the
    thresholded null is exactly zero, so any positive cut controls Type-I
    error. Kept entries move by at most ``tau`` and killed ones by less than
    ``2 tau``, so ``||X^Th - M||_2 < 2 k tau`` for ``k``-sparse ``M``. A
    ``k x k`` block of height ``lambda / k > 2 tau`` keeps every entry, and
    then ``||X^Th||_2 > lambda - k tau``; the default cut ``k tau`` thus
    detects such blocks whenever ``lambda > 2 k tau``.
    """
    A = as_matrix(X, "X")
    p = A.shape[0]
    if not 1 <= k <= p:
        raise InvalidInputError("need 1 <= k <= p")
    tau = threshold_level(p, epsilon)
    stat = spectral_norm(threshold_estimate(A, tau))
    return TestReport.from_values(
        {"thresholded_spectral": stat},
        {"tau": tau, "lambda_cut": cut_factor * k * tau},
    )


def frob_chi2_statistic(X) -> float:
    """``||X||_F^2 - p^2`` for a ``p x p`` observation."""
    A = as_matrix(X, "X")
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError("X must be square")
    return float(np.sum(A * A) - A.shape[0] ** 2)


def chi2_threshold(p: int, epsilon: float) -> float:
    """``s = 2 log(1/eps) + 2 p sqrt(log(1/eps))``."""
    L = math.log(1.0 / epsilon)
    return 2.0 * L + 2.0 * p * math.sqrt(L)


def scan_threshold(p: int, m: int) -> float:
    """``t = 2 sqrt(m) + 4 sqrt(m log(e p / m))``."""
    return 2.0 * math.sqrt(m) + 4.0 * math.sqrt(m * math.log(math.e * p / m))


def default_scan_size(p: int, k: int, c_scan: float = 1.0) -> int:
    """``ceil(c_scan * sqrt(k p / log(e p / k)))``, clipped to ``[1, p]``."""
    m = math.ceil(c_scan * math.sqrt(k * p / math.log(math.e * p / k)))
    return max(1, min(p, m))


def mean_chi2_scan_test(X, k: int, epsilon: float, cfg: ScanConfig | None = None,
                        c_scan: float = 1.0) -> TestReport:
    """Reject if ``||X||_F^2 - p^2 >= s`` or the ``m x m`` scan statistic is ``>= t``.

    ``cfg`` fixes the scan size and search; without it ``m`` comes from
    :func:`default_scan_size` and the search strategy is ``auto``.
    """
    _check_eps(epsilon, 0.5)
    A = as_matrix(X, "X")
    p = A.shape[0]
    if cfg is None:
        cfg = ScanConfig(default_scan_size(p, k, c_scan))
    s = chi2_threshold(p, epsilon)
    t = scan_threshold(p, cfg.m)
    chi = frob_chi2_statistic(A)
    scan = scan_statistic(A, cfg)
    return TestReport.from_values(
        {"frob_chi2": chi, "scan_value": scan.value},
        {"s": s, "t": t, "m": cfg.m},
        witness=(scan.I, scan.J),
        approximate=not scan.exact,
    )


# ----------------------------------------------------------------------------
# covariance model
# ----------------------------------------------------------------------------

def sample_covariance(data) -> np.ndarray:
    """``S = (1/n) sum_i x_i x_i^T`` with no centring."""
    D = as_matrix(data, "data")
    n = D.shape[0]
    if n < 1:
        raise InvalidInputError("sample covariance needs at least one sample")
    return D.T @ D / n


def q_statistic(data) -> float:
    """Unbiased estimate of ``||Sigma - I||_F^2``.

    ``Q = p + binom(n,2)^-1 sum_{i<j} (<x_i,x_j>^2 - <x_i,x_i> - <x_j,x_j>)``,
    computed from the Gram matrix.
    """
    D = as_matrix(data, "data")
    n, p = D.shape
    if n < 2:
        raise InvalidInputError("Q statistic needs n >= 2")
    G = D @ D.T
    diag = np.diag(G)
    cross = (np.sum(G * G) - np.sum(diag * diag)) / 2.0
    return float(p + (cross - (n - 1) * diag.sum()) / (n * (n - 1) / 2.0))


def cov_threshold_test(data, k: int, epsilon: float, c_tau: float = 8.0, c_n: float = 10.0,
                       cut_factor: float = 1.0) -> TestReport:
    """Threshold ``S - I`` at ``tau = sqrt(c_tau log(p/eps) / n)`` and compare its norm with ``cut_factor * k * tau``.

    The diagonal is thresholded too. A sample size below ``c_n log p`` does not
    stop the test; it adds a warning to the report.
    """
    _check_eps(epsilon)
    D = as_matrix(data, "data")
    n, p = D.shape
    if not 1 <= k <= p:
        raise InvalidInputError("need 1 <= k <= p")
    notes = []
    if n < c_n * math.log(p):
        notes.append(f"sample size n={n} below {c_n} log p = {c_n * math.log(p):.1f}")
    S = sample_covariance(D)
    tau = math.sqrt(c_tau * math.log(p / epsilon) / n)
    stat = spectral_norm(threshold_estimate(S - np.eye(p), tau))
    return TestReport.from_values(
        {"thresholded_spectral": stat},
        {"tau": tau, "lambda_cut": cut_factor * k * tau},
        warnings=notes,
    )


def calibrate_cov_scan_threshold(p: int, n: int, m: int, epsilon: float, reps: int = 200,
                                 cfg: ScanConfig | None = None, seed=0) -> float:
    """Empirical ``(1 - epsilon/2)``-quantile of the principal scan of ``S`` under ``Sigma = I``.

    Each replicate draws its own data stream from ``seed``; the scan search
    uses ``cfg`` (principal, size ``m``).
    """
    _check_eps(epsilon)
    if reps < 1:
        raise InvalidInputError("reps must be positive")
    cfg = _principal_cfg(cfg, m)
    seed = as_seed(seed)
    vals = np.empty(reps)
    for r in range(reps):
        Z = seed.generator(r).standard_normal((n, p))
        vals[r] = scan_statistic(sample_covariance(Z), cfg).value
    return float(np.quantile(vals, 1.0 - epsilon / 2.0, method="higher"))


def _principal_cfg(cfg, m):
    if cfg is None:
        return ScanConfig(m, principal_only=True)
    if not cfg.principal_only:
        raise InvalidInputError("the covariance scan must be principal (cfg.principal_only=True)")
    return cfg if cfg.m == m else cfg.with_m(m)


def cov_chi2_scan_test(data, k: int, epsilon: float, cfg: ScanConfig | None = None,
                       t_cov: float | None = None, c_scan: float = 1.0,
                       s_cov: float | None = None) -> TestReport:
    """Reject if ``Q >= s`` or the principal ``m x m`` scan of ``S`` is ``>= t``.

    ``s`` and ``t`` default to the Gaussian formulas :func:`chi2_threshold` and
    :func:`scan_threshold`. Those are on the wrong scale for a sample
    covariance (``Q`` fluctuates at order ``p / n``), so ``s_cov`` and
    ``t_cov`` override them; :func:`calibrate_cov_scan_threshold` supplies a
    calibrated ``t_cov``.
    """
    _check_eps(epsilon, 0.5)
    D = as_matrix(data, "data")
    n, p = D.shape
    m = cfg.m if cfg is not None else default_scan_size(p, k, c_scan)
    cfg = _principal_cfg(cfg, m)
    s = chi2_threshold(p, epsilon) if s_cov is None else float(s_cov)
    t = scan_threshold(p, m) if t_cov is None else float(t_cov)
    S = sample_covariance(D)
    scan = scan_statistic(S, cfg)
    q = q_statistic(D) if n >= 2 else -math.inf
    return TestReport.from_values(
        {"q_stat": q, "scan_value": scan.value},
        {"s": s, "t": t, "m": m},
        witness=(scan.I, scan.J),
        approximate=not scan.exact,
    )
