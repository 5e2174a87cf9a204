"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (visible even without
``-s``) and then asserts the same condition.
"""
import math

import numpy as np
import pytest

from oracles import brute_overlap_mgfs
from sparsedet.cli import main
from sparsedet.detectors import chi2_threshold, q_statistic, threshold_level
from sparsedet.divergence import (beta_star, boundary_curves, chi2_gaussian_mixture_mc,
                                  chi2_upper_bound_cs, mgf_gh_exact, mgf_h_exact, permutation_mgf,
                                  tv_upper_from_chi2)
from sparsedet.experiment import ExperimentConfig, run_experiment
from sparsedet.matrix import spectral_norm
from sparsedet.priors import SignalSpec, sample_gaussian_data
from sparsedet.rng import RngSeed
from sparsedet.scan import ScanConfig, scan_statistic
from sparsedet.witness import find_witness, sparse_corner_draw, rv_row_sample


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def _binom_se(p, n):
    return math.sqrt(p * (1 - p) / n)


def test_01_threshold_guarantee(report):
    p, k, eps, reps = 100, 2, 0.1, 500
    lam = 1.05 * 2 * k * threshold_level(p, eps)
    cfg = ExperimentConfig.from_dict({
        "schema": 1, "model": "mean", "p": p, "k": k, "replicates": reps, "seed": 1,
        "lambda_grid": [lam], "signal": {"kind": "block"},
        "tests": [{"name": "threshold", "epsilon": eps}]})
    (row,) = run_experiment(cfg).rows
    total = row.type1_hat + row.type2_hat
    bound = eps + 3 * _binom_se(eps, reps)
    report(1, total <= bound, f"type1+type2={total:.4f} <= {bound:.4f} (lambda={lam:.3f})")


def test_02_chi2_null_calibration(report):
    reps = 2000
    worst = []
    for p in (20, 50):
        for eps in (0.05, 0.1):
            s = chi2_threshold(p, eps)
            seed = RngSeed(2).child(p, int(eps * 100))
            exceed = np.mean([np.sum(seed.generator(r).standard_normal((p, p)) ** 2) - p * p > s
                              for r in range(reps)])
            worst.append((exceed - eps - 3 * _binom_se(eps, reps), p, eps, exceed))
    margin, p, eps, rate = max(worst)
    report(2, margin <= 0, f"worst cell p={p} eps={eps}: rate={rate:.4f}, slack left {-margin:.4f}")


def test_03_scan_null_bound(report):
    m, reps = 50, 200
    norms = [spectral_norm(RngSeed(3).generator(r).standard_normal((m, m))) for r in range(reps)]
    mean, bound = float(np.mean(norms)), 2 * math.sqrt(m) * 1.02
    report(3, mean <= bound, f"mean ||W||={mean:.4f} <= {bound:.4f}")


def test_04_scan_oracle_equivalence(report):
    mismatches = 0
    for seed in range(50):
        X = RngSeed(4).generator(seed).standard_normal((10, 10))
        ex = scan_statistic(X, ScanConfig(2, "exhaustive")).value
        rr = scan_statistic(X, ScanConfig(2, "random_restarts", restarts=200, iters=50, seed=seed)).value
        mismatches += rr != ex
    report(4, mismatches == 0, f"{50 - mismatches}/50 exact matches")


def test_05_witness_guarantee(report):
    ok, size_ok = 0, True
    for r in range(100):
        M = sparse_corner_draw(128, 64, 8, seed=(5, r))
        rep = find_witness(M, 8, restarts=10, seed=(5, r))
        ok += rep.success
        sampled = rep.J if rep.side == "row-heavy" else rep.I
        size_ok &= len(sampled) <= rep.d * 8
    report(5, ok >= 95 and size_ok, f"{ok}/100 successes, size bound held: {size_ok}")


def test_06_rv_unbiased(report):
    X = np.array([[1.0, 2.0, 0.0], [0.5, -1.0, 3.0], [0.0, 0.2, -0.7]])
    reps = 10_000
    acc = np.empty((reps, 3, 3))
    for r in range(reps):
        Xs = rv_row_sample(X, 1, seed=(6, r))
        acc[r] = Xs.T @ Xs
    z = np.abs(acc.mean(axis=0) - X.T @ X) / (acc.std(axis=0, ddof=1) / math.sqrt(reps))
    worst = float(np.nanmax(z))
    report(6, worst <= 3, f"max |z| over entries = {worst:.3f} <= 3")


def test_07_mgf_exactness(report):
    worst = 0.0
    for p in range(1, 13):
        for m in range(1, p + 1):
            for t, lam in ((0.05, 0.02), (0.2, 0.1)):
                gh, hh = brute_overlap_mgfs(p, m, t, lam)
                worst = max(worst, abs(mgf_gh_exact(p, m, t) - gh) / gh, abs(mgf_h_exact(p, m, lam) - hh) / hh)
    a, b = mgf_gh_exact(4, 2, 0.1), mgf_h_exact(6, 2, 0.1)
    spots = round(a, 4) == 1.1111 and round(b, 4) == 1.0889
    report(7, worst <= 1e-12 and spots, f"max rel err {worst:.2e}; spots {a:.6f}, {b:.6f}")


def test_08_q_unbiased(report):
    p, n, reps = 10, 50, 10_000
    planted = np.eye(p)
    planted[0, 1] = planted[1, 0] = 0.5
    lines = []
    ok = True
    for name, Sigma, target, stream in (("null", np.eye(p), 0.0, 0), ("planted", planted, 0.5, 1)):
        q = np.array([q_statistic(sample_gaussian_data(Sigma, n, RngSeed(8).child(stream, r)))
                      for r in range(reps)])
        z = abs(q.mean() - target) / (q.std(ddof=1) / math.sqrt(reps))
        ok &= z <= 3
        lines.append(f"{name}: mean {q.mean():.4f} (z={z:.2f})")
    report(8, ok, "; ".join(lines))


def test_09_permutation_limit(report):
    est = permutation_mgf(200, 100_000, seed=9)
    target = math.exp(math.e - 1)
    rel = abs(est.value / target - 1)
    e1 = abs(permutation_mgf(1).value - math.e)
    e2 = abs(permutation_mgf(2).value - (1 + math.e**2) / 2)
    ok = rel <= 0.05 and e1 <= 1e-12 and e2 <= 1e-12
    report(9, ok, f"MC {est.value:.4f} vs {target:.4f} (rel {rel:.4f}); exact errs {e1:.1e}, {e2:.1e}")


def test_10_boundary_sanity(report):
    worst = 0.0
    for e in range(8, 21):
        p = 2**e
        bound = 3 * math.sqrt(math.log(p) / math.log(math.log(p)))
        for k in range(4, p + 1):
            pt = boundary_curves(p, k)
            worst = max(worst, pt.lambda1 / pt.lambda0 / bound)
    knees = beta_star(1 / 3) == 1 / 3 and beta_star(1.0) == 0.5
    report(10, worst <= 1 and knees, f"max ratio / allowed = {worst:.4f}; knees exact: {knees}")


def test_11_chi2_consistency(report):
    worst, count = -math.inf, 0
    for p in range(2, 9):
        for m in range(1, p + 1):
            for k in range(1, m + 1):
                for s in (0.1, 0.4):
                    spec = SignalSpec("least_favorable", p, {"m": m, "k": k, "t": math.sqrt(s)})
                    mc = chi2_gaussian_mixture_mc(spec, 2000, seed=RngSeed(11).child(p, m, k, int(s * 10)))
                    ub = chi2_upper_bound_cs(p, m, k, s)
                    worst = max(worst, mc.value - 3 * mc.std_error - ub)
                    count += 1
    resid = max(abs((v := tv_upper_from_chi2(c)) * math.log((1 + v) / (1 - v)) - c)
                for c in np.linspace(0, 10, 1001))
    ok = worst <= 0 and resid <= 1e-10
    report(11, ok, f"{count} instances, max (MC-3SE)-bound = {worst:.4f}; TV residual {resid:.1e}")


def test_12_determinism(report, tmp_path):
    cfg = tmp_path / "det.toml"
    cfg.write_text('schema = 1\nmodel = "mean"\np = 40\nk = 2\nreplicates = 60\nseed = 12\n'
                   'lambda_grid = [8.0, 16.0, 24.0]\n[signal]\nkind = "least_favorable"\nm = 6\n'
                   '[[tests]]\nname = "threshold"\nepsilon = 0.1\n'
                   '[[tests]]\nname = "chi2_scan"\nepsilon = 0.1\nscan = { restarts = 3, iters = 5 }\n')
    outs = []
    for threads in ("1", "8", "1"):
        out = tmp_path / f"out{len(outs)}.csv"
        assert main(["simulate", str(cfg), "--threads", threads, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    report(12, ok, f"1/8/1 threads byte-identical: {ok} ({len(outs[0])} bytes)")
