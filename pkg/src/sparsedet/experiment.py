"""Config-driven Monte Carlo sweeps of the detectors.

A config is a TOML file::

    schema = 1
    model = "mean"            # or "covariance" (then n is required)
    p = 100
    k = 2
    replicates = 500
    seed = 1
    lambda_grid = [20.0, 25.0]

    [signal]
    kind = "block"            # block | least_favorable (needs m) | permutation | zero

    [[tests]]
    name = "threshold"        # or "chi2_scan"
    epsilon = 0.1

    [output]
    csv = "phase.csv"
    plot = "phase.svg"

For each test the Type-I error is estimated once under the null and the
Type-II error at every grid value under the configured signal scaled to that
value. Replicate ``r`` draws its noise from a sub-stream keyed by ``r`` alone,
so results do not depend on the number of threads, and the same noise is
reused across grid values (common random numbers).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .detectors import (calibrate_cov_scan_threshold, cov_chi2_scan_test, cov_threshold_test,
                        default_scan_size, mean_chi2_scan_test, mean_threshold_test)
from .divergence import beta_star
from .errors import InvalidInputError
from .priors import SignalSpec, gen_block_signal
from .rng import RngSeed, as_seed
from .scan import ScanConfig

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
TEST_NAMES = ("threshold", "chi2_scan")
PHASE_COLUMNS = ("alpha", "beta", "p", "k", "lambda", "test", "type1_hat", "type2_hat", "se",
                 "replicates", "seed")
THREADS_ENV = "SPARSEDET_THREADS"
SIGNAL_NOTE = ("type2_hat is measured at the configured signal, one element of the alternative; "
               "it lower-bounds the worst-case Type-II error")

_TEST_KEYS = {
    "threshold": {"name", "epsilon", "cut_factor", "c_tau", "c_n"},
    "chi2_scan": {"name", "epsilon", "c_scan", "scan", "t_cov", "s_cov", "calibrate_reps"},
}


class ConfigError(InvalidInputError):
    """A config file is missing, unreadable or invalid. The message names the field."""


@dataclass
class ExperimentConfig:
    model: str
    p: int
    k: int
    signal: dict
    grid: list
    tests: list
    replicates: int
    seed: int = 0
    n: int | None = None
    grid_kind: str = "lambda"
    csv_path: str | None = None
    plot_path: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model not in ("mean", "covariance"):
            raise ConfigError(f"model: expected 'mean' or 'covariance', got {self.model!r}")
        if not isinstance(self.p, int) or self.p < 2:
            raise ConfigError("p: must be an integer >= 2")
        if not isinstance(self.k, int) or not 1 <= self.k <= self.p:
            raise ConfigError("k: must be an integer in [1, p]")
        if self.model == "covariance" and (not isinstance(self.n, int) or self.n < 2):
            raise ConfigError("n: covariance model needs an integer sample size >= 2")
        if not self.grid or any(not isinstance(v, (int, float)) or v < 0 for v in self.grid):
            raise ConfigError(f"{self.grid_kind}_grid: must be a nonempty list of nonnegative numbers")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise ConfigError("replicates: must be a positive integer")
        kind = self.signal.get("kind")
        allowed = ("block", "zero") if self.model == "covariance" else ("block", "least_favorable",
                                                                        "permutation", "zero")
        if kind not in allowed:
            raise ConfigError(f"signal.kind: expected one of {allowed} for the {self.model} model, got {kind!r}")
        if kind == "least_favorable" and "m" not in self.signal:
            raise ConfigError("signal.m: least_favorable signal needs a block size m")
        if not self.tests:
            raise ConfigError("tests: at least one test is required")
        for i, t in enumerate(self.tests):
            name = t.get("name")
            if name not in TEST_NAMES:
                raise ConfigError(f"tests[{i}].name: expected one of {TEST_NAMES}, got {name!r}")
            extra = set(t) - _TEST_KEYS[name]
            if extra:
                raise ConfigError(f"tests[{i}]: unknown parameter(s) {sorted(extra)}")
            eps = t.get("epsilon")
            upper = 0.5 if name == "chi2_scan" else 1.0
            if not isinstance(eps, (int, float)) or not 0 < eps < upper:
                raise ConfigError(f"tests[{i}].epsilon: must lie in (0, {upper})")

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | None = None) -> "ExperimentConfig":
        d = dict(d)
        schema = d.pop("schema", None)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {schema!r}")
        for key in ("model", "p", "k", "replicates", "signal", "tests"):
            if key not in d:
                raise ConfigError(f"{key}: missing")
        if ("lambda_grid" in d) == ("t_grid" in d):
            raise ConfigError("lambda_grid: give exactly one of lambda_grid and t_grid")
        grid_kind = "lambda" if "lambda_grid" in d else "t"
        out = d.get("output", {})

        def resolve(path):
            if path is None or base_dir is None or os.path.isabs(path):
                return path
            return os.path.join(base_dir, path)

        return cls(
            model=d["model"], p=d["p"], k=d["k"], signal=dict(d["signal"]),
            grid=list(d[f"{grid_kind}_grid"]), tests=[dict(t) for t in d["tests"]],
            replicates=d["replicates"], seed=d.get("seed", 0), n=d.get("n"), grid_kind=grid_kind,
            csv_path=resolve(out.get("csv")), plot_path=resolve(out.get("plot")),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                d = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"{path}: config file not found") from None
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(d, os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA_VERSION, "model": self.model, "p": self.p, "k": self.k,
             "replicates": self.replicates, "seed": self.seed, f"{self.grid_kind}_grid": self.grid,
             "signal": self.signal, "tests": self.tests}
        if self.n is not None:
            d["n"] = self.n
        return d


@dataclass(frozen=True)
class PhaseRow:
    alpha: float
    beta: float
    p: int
    k: int
    lam: float
    test: str
    type1_hat: float
    type2_hat: float
    se: float
    replicates: int
    seed: int

    def values(self) -> tuple:
        return (self.alpha, self.beta, self.p, self.k, self.lam, self.test, self.type1_hat,
                self.type2_hat, self.se, self.replicates, self.seed)


@dataclass
class PhaseTable:
    rows: list = field(default_factory=list)
    note: str = SIGNAL_NOTE

    def __len__(self):
        return len(self.rows)


# ----------------------------------------------------------------------------
# signals and tests
# ----------------------------------------------------------------------------

def _signal_norm_and_amp(cfg, value):
    """Map a grid value to (nominal spectral norm, amplitude parameter)."""
    kind, k = cfg.signal["kind"], cfg.k
    if cfg.grid_kind == "lambda":
        lam = float(value)
        amp = lam / k if kind in ("block", "least_favorable") else lam
    else:
        amp = float(value)
        lam = amp * k if kind in ("block", "least_favorable") else amp
    return lam, amp


def _mean_signal(cfg, amp, seed: RngSeed):
    kind = cfg.signal["kind"]
    if kind == "zero":
        return np.zeros((cfg.p, cfg.p))
    if kind == "block":
        return gen_block_signal(cfg.p, cfg.k, amp)
    if kind == "permutation":
        return SignalSpec("permutation", cfg.p, {"scale": amp}).draw(seed)
    return SignalSpec("least_favorable", cfg.p, {"m": cfg.signal["m"], "k": cfg.k, "t": amp}).draw(seed)


def _cov_root(cfg, amp):
    # Sigma = I + amp * (k x k all-ones block); its square root is I + c * block
    # with c solving (1 + c k)^2 = 1 + amp * k.
    c = (math.sqrt(1.0 + amp * cfg.k) - 1.0) / cfg.k if cfg.signal["kind"] == "block" else 0.0
    root = np.eye(cfg.p)
    root[:cfg.k, :cfg.k] += c
    return root


def _scan_cfg(tcfg, p, k, principal):
    sc = dict(tcfg.get("scan", {}))
    m = sc.pop("m", None) or default_scan_size(p, k, tcfg.get("c_scan", 1.0))
    try:
        return ScanConfig(m, principal_only=principal, **sc)
    except TypeError as exc:
        raise ConfigError(f"tests.scan: {exc}") from None


def _make_runner(cfg, tcfg, test_index, seed):
    """Return ``f(observation) -> bool`` (reject) for one configured test."""
    name, eps = tcfg["name"], tcfg["epsilon"]
    if cfg.model == "mean":
        if name == "threshold":
            cut = tcfg.get("cut_factor", 1.0)
            return lambda X: mean_threshold_test(X, cfg.k, eps, cut).reject
        scfg = _scan_cfg(tcfg, cfg.p, cfg.k, False)
        return lambda X: mean_chi2_scan_test(X, cfg.k, eps, scfg).reject
    if name == "threshold":
        kw = {key: tcfg[key] for key in ("c_tau", "c_n", "cut_factor") if key in tcfg}
        return lambda D: cov_threshold_test(D, cfg.k, eps, **kw).reject
    scfg = _scan_cfg(tcfg, cfg.p, cfg.k, True)
    t_cov = tcfg.get("t_cov")
    if t_cov is None and "calibrate_reps" in tcfg:
        t_cov = calibrate_cov_scan_threshold(cfg.p, cfg.n, scfg.m, eps, tcfg["calibrate_reps"],
                                             scfg, seed.child(3, test_index))
    s_cov = tcfg.get("s_cov")
    return lambda D: cov_chi2_scan_test(D, cfg.k, eps, scfg, t_cov, s_cov=s_cov).reject


def _observe(cfg, amp, r, seed: RngSeed):
    noise_seed = seed.child(1, r).generator()
    if cfg.model == "mean":
        return _mean_signal(cfg, amp, seed.child(2, r)) + noise_seed.standard_normal((cfg.p, cfg.p))
    return noise_seed.standard_normal((cfg.n, cfg.p)) @ _cov_root(cfg, amp)


def resolve_threads(threads: int | None = None) -> int:
    """Thread count from the argument, else ``$SPARSEDET_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV}: expected an integer, got {env!r}") from None
        else:
            threads = 1
    if threads < 1:
        raise ConfigError("threads: must be positive")
    return threads


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> PhaseTable:
    """Estimate Type-I/II errors for every (test, grid value); rows sorted by (test, lambda)."""
    threads = resolve_threads(threads)
    seed = as_seed(cfg.seed)
    runners = [_make_runner(cfg, t, i, seed) for i, t in enumerate(cfg.tests)]
    points = [_signal_norm_and_amp(cfg, v) for v in cfg.grid]
    R = cfg.replicates

    # one unit = one replicate at one amplitude (None = null), evaluated by every test
    amps = [None] + [amp for _, amp in points]

    def unit(job):
        a, r = job
        X = _observe_null(cfg, r, seed) if amps[a] is None else _observe(cfg, amps[a], r, seed)
        return [run(X) for run in runners]

    jobs = [(a, r) for a in range(len(amps)) for r in range(R)]
    if threads == 1:
        results = list(map(unit, jobs))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(unit, jobs))
    rejects = np.array(results, dtype=bool).reshape(len(amps), R, len(runners))

    rows = []
    for ti, tcfg in enumerate(cfg.tests):
        type1 = float(rejects[0, :, ti].mean())
        for gi, (lam, _) in enumerate(points):
            type2 = float(1.0 - rejects[gi + 1, :, ti].mean())
            se = math.sqrt(type2 * (1.0 - type2) / R)
            alpha = math.log(cfg.k) / math.log(cfg.p)
            beta = math.log(lam) / math.log(cfg.p) if lam > 0 else -math.inf
            rows.append(PhaseRow(alpha, beta, cfg.p, cfg.k, lam, tcfg["name"], type1, type2, se, R,
                                 cfg.seed))
    rows.sort(key=lambda row: (row.test, row.lam))
    return PhaseTable(rows)


def _observe_null(cfg, r, seed):
    gen = seed.child(0, r).generator()
    if cfg.model == "mean":
        return gen.standard_normal((cfg.p, cfg.p))
    return gen.standard_normal((cfg.n, cfg.p))


# ----------------------------------------------------------------------------
# output
# ----------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def format_phase_csv(table: PhaseTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(PHASE_COLUMNS)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def emit_phase_csv(table: PhaseTable, path) -> None:
    """Write the table as CSV (17 significant digits); overwrites atomically."""
    text = format_phase_csv(table)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write phase table to {path}: {exc.strerror or exc}") from exc


def read_phase_csv(path) -> PhaseTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != PHASE_COLUMNS:
            raise InvalidInputError(f"{path}: unexpected header {header}")
        rows = []
        for rec in reader:
            a, b, p, k, lam, test, t1, t2, se, reps, seed = rec
            rows.append(PhaseRow(float(a), float(b), int(p), int(k), float(lam), test, float(t1),
                                 float(t2), float(se), int(reps), int(seed)))
    return PhaseTable(rows)


def write_metadata(cfg: ExperimentConfig, path) -> None:
    """Sidecar JSON with the resolved config and the note on signal-specific errors."""
    with open(path, "w") as fh:
        json.dump({"config": cfg.to_dict(), "note": SIGNAL_NOTE}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def region_polygons() -> dict:
    """Vertices of the four regions of the (alpha, beta) phase diagram."""
    return {
        "impossible": [(0, 0), (1 / 3, 1 / 3), (1, 0.5), (1, 0)],
        "thresholding": [(0, 0), (0.5, 0.5), (0, 0.5)],
        "spectrum": [(0, 0.5), (1, 0.5), (1, 1), (0, 1)],
        "hard": [(1 / 3, 1 / 3), (0.5, 0.5), (1, 0.5)],
    }


def emit_phase_plot(table: PhaseTable | None, path, overlay=True) -> None:
    """Static SVG of total error over (alpha, beta) with the boundary overlay.

    Points are coloured by ``type1_hat + type2_hat``. ``table`` may be None or
    empty to draw the overlay alone.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "sparsedet", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5, 5))
        if overlay:
            colors = {"impossible": "0.8", "thresholding": "#b8e0b8", "spectrum": "#b8c8f0", "hard": "#f0b8b8"}
            for name, poly in region_polygons().items():
                ax.fill(*zip(*poly), color=colors[name], alpha=0.5, lw=0)
            a = np.linspace(0, 1, 301)
            ax.plot(a, [beta_star(x) for x in a], "k-", lw=1.5, label="beta*")
            ax.plot([0, 0.5], [0, 0.5], "k--", lw=0.8)
            ax.plot([0, 1], [0.5, 0.5], "k--", lw=0.8)
        if table is not None and len(table):
            pts = [(r.alpha, r.beta, r.type1_hat + r.type2_hat) for r in table.rows if math.isfinite(r.beta)]
            if pts:
                x, y, z = map(np.array, zip(*pts))
                sc = ax.scatter(x, y, c=np.clip(z, 0, 1), cmap="viridis", vmin=0, vmax=1,
                                edgecolors="k", linewidths=0.3, zorder=3)
                fig.colorbar(sc, ax=ax, label="type I + type II")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_xlabel("alpha = log k / log p")
        ax.set_ylabel("beta = log lambda / log p")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
