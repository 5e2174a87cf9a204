import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_overlap_mgfs, brute_prior_chi2, fixed_point_mgf
from sparsedet.divergence import (BoundaryPoint, beta_star, boundary_curves, chi2_gaussian_mixture_mc,
                                  chi2_prior_exact, chi2_upper_bound_cs, cov_chi2_pair_term,
                                  cov_lower_bound_advisory, hypergeom_logpmf, lambda0, lambda1,
                                  mgf_gh_exact, mgf_h_exact, optimize_s_star, permutation_mgf,
                                  s_star_at, tv_upper_from_chi2)
from sparsedet.errors import BudgetExceededError, InvalidInputError
from sparsedet.priors import SignalSpec


class TestOverlapMGF:
    @pytest.mark.parametrize("p", range(1, 13))
    def test_matches_enumeration(self, p):
        for m in range(1, p + 1):
            if math.comb(p, m) > 1000:
                continue
            for t, lam in ((0.05, 0.02), (0.3, 0.1)):
                gh, hh = brute_overlap_mgfs(p, m, t, lam)
                assert mgf_gh_exact(p, m, t) == pytest.approx(gh, rel=1e-12)
                assert mgf_h_exact(p, m, lam) == pytest.approx(hh, rel=1e-12)

    def test_spot_values(self):
        assert mgf_gh_exact(4, 2, 0.1) == pytest.approx(1.1111, abs=5e-5)
        assert mgf_h_exact(6, 2, 0.1) == pytest.approx(1.0889, abs=5e-5)

    def test_single_index(self):
        # m = 1: H is Bernoulli(1/p) and G_H^2 = H
        for p in (1, 3, 10):
            want = 1 + (math.e ** 0.4 - 1) / p
            assert mgf_gh_exact(p, 1, 0.4) == pytest.approx(want, rel=1e-14)
            assert mgf_h_exact(p, 1, 0.4) == pytest.approx(want, rel=1e-14)

    def test_full_overlap(self):
        for p in (1, 5, 9):
            assert mgf_h_exact(p, p, 0.01) == pytest.approx(math.exp(0.01 * p * p), rel=1e-13)

    def test_zero_argument(self):
        assert mgf_gh_exact(10, 4, 0.0) == 1.0
        assert mgf_h_exact(10, 4, 0.0) == 1.0

    def test_pmf_sums_to_one(self):
        for p, m in ((10, 3), (64, 64), (200, 64)):
            _, lp = hypergeom_logpmf(p, m)
            assert math.fsum(np.exp(lp)) == pytest.approx(1.0, rel=1e-12)

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            mgf_h_exact(200, 65, 0.1)

    @pytest.mark.parametrize("args", [(3, 0, 0.1), (3, 4, 0.1)])
    def test_bad_m(self, args):
        with pytest.raises(InvalidInputError):
            mgf_gh_exact(*args)

    def test_negative_t(self):
        with pytest.raises(InvalidInputError):
            mgf_gh_exact(5, 2, -0.1)


class TestPriorChi2:
    @pytest.mark.parametrize("p,m,k,t", [(3, 1, 1, 0.7), (4, 2, 1, 0.5), (4, 2, 2, 0.4), (3, 2, 1, 1.0)])
    def test_matches_enumeration(self, p, m, k, t):
        assert chi2_prior_exact(p, m, k, t).value == pytest.approx(brute_prior_chi2(p, m, k, t), rel=1e-10)

    def test_zero(self):
        est = chi2_prior_exact(10, 3, 2, 0.0)
        assert est.value == 0.0 and est.std_error == 0.0 and est.method == "exact_enumeration"

    @pytest.mark.parametrize("t", [0.3, 0.6])
    def test_monte_carlo_agrees(self, t):
        spec = SignalSpec("least_favorable", 8, {"m": 4, "k": 2, "t": t})
        mc = chi2_gaussian_mixture_mc(spec, 20_000, seed=3)
        exact = chi2_prior_exact(8, 4, 2, t).value
        assert abs(mc.value - exact) <= 4 * mc.std_error
        assert mc.method == "monte_carlo(20000)"

    def test_cs_bound_dominates_exact(self):
        for p, m, k in ((8, 4, 2), (12, 3, 1), (30, 6, 2)):
            for s in (0.05, 0.2, 0.5, 1.0):
                assert chi2_upper_bound_cs(p, m, k, s) >= chi2_prior_exact(p, m, k, math.sqrt(s)).value - 1e-12

    def test_cs_monotone(self):
        vals = [chi2_upper_bound_cs(30, 6, 2, s) for s in np.linspace(0, 2, 21)]
        assert vals[0] == 0.0
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_mc_overflow_flag(self):
        spec = SignalSpec("least_favorable", 4, {"m": 4, "k": 4, "t": 30.0})
        est = chi2_gaussian_mixture_mc(spec, 5, seed=0)
        assert est.overflow and math.isinf(est.value)

    def test_mc_deterministic(self):
        spec = SignalSpec("least_favorable", 8, {"m": 4, "k": 2, "t": 0.5})
        assert chi2_gaussian_mixture_mc(spec, 50, 1) == chi2_gaussian_mixture_mc(spec, 50, 1)

    def test_mc_reps(self):
        with pytest.raises(InvalidInputError):
            chi2_gaussian_mixture_mc(SignalSpec("zero", 3), 1)


class TestSStar:
    def test_positive_and_finite(self):
        for p in (64, 1024):
            for k in (2, 8, 32):
                s, m = optimize_s_star(p, k, range(k, p + 1))
                assert 0 < s < math.inf and k <= m <= p

    def test_tie_break_smallest(self):
        # c = 0 makes every candidate 0
        assert optimize_s_star(100, 2, [5, 3, 9], c=0.0) == (0.0, 3)

    def test_keeps_cs_bound_bounded(self):
        for p, k in ((64, 2), (64, 4)):
            s, m = optimize_s_star(p, k, range(k, min(p, 64) + 1))
            assert chi2_upper_bound_cs(p, m, k, s) <= 1.0

    def test_small_k_scaling(self):
        # k sqrt(s*) tracks lambda0 up to a constant factor
        for k in (2, 4):
            ratios = []
            for p in (2**10, 2**14, 2**18, 2**22):
                s, _ = optimize_s_star(p, k, np.unique(np.geomspace(k, p, 200).astype(int)))
                ratios.append(k * math.sqrt(s) / lambda0(p, k)[0])
            assert max(ratios) / min(ratios) <= 2.0

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            s_star_at(10, 5, 3)
        with pytest.raises(InvalidInputError):
            optimize_s_star(10, 2, [])


class TestTV:
    @settings(max_examples=100)
    @given(st.floats(0, 10))
    def test_residual(self, chi2):
        v = tv_upper_from_chi2(chi2)
        assert 0 <= v < 1
        assert abs(v * math.log((1 + v) / (1 - v)) - chi2) <= 1e-10

    def test_monotone(self):
        vs = [tv_upper_from_chi2(c) for c in np.linspace(0, 10, 50)]
        assert vs[0] == 0.0
        assert all(b > a for a, b in zip(vs, vs[1:]))

    def test_negative(self):
        with pytest.raises(InvalidInputError):
            tv_upper_from_chi2(-1e-3)


class TestCovariancePair:
    def test_scalar(self):
        det, sur = cov_chi2_pair_term([[0.5]], [[0.5]], 2)
        assert det == pytest.approx(4 / 3, rel=1e-14)
        assert sur == pytest.approx(math.exp(0.25), rel=1e-14)

    def test_det_dominates_surrogate(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            A = rng.standard_normal((4, 4))
            A = 0.9 * (A + A.T) / np.linalg.norm(A + A.T, 2)
            det, sur = cov_chi2_pair_term(A, A, 3)
            assert det >= sur * (1 - 1e-12)

    def test_divergent(self):
        with pytest.raises(InvalidInputError):
            cov_chi2_pair_term(np.eye(2), 0.5 * np.eye(2), 2)

    def test_advisory(self):
        adv = cov_lower_bound_advisory(10**6, 100, 2, 0.1, 10)
        assert set(adv) == {"overlap_sum", "row_noise", "residual", "residual_overlap"}
        assert all(v["ok"] for v in adv.values())
        assert not cov_lower_bound_advisory(1, 100, 2, 10.0, 10)["residual"]["ok"]


class TestPermutation:
    @pytest.mark.parametrize("p", range(1, 8))
    def test_exact(self, p):
        est = permutation_mgf(p)
        assert est.value == pytest.approx(fixed_point_mgf(p), rel=1e-12)
        assert est.method == "exact_enumeration"

    def test_closed_forms(self):
        assert abs(permutation_mgf(1).value - math.e) <= 1e-12
        assert abs(permutation_mgf(2).value - (1 + math.e**2) / 2) <= 1e-12

    def test_poisson_limit(self):
        est = permutation_mgf(200, 100_000, seed=0)
        assert abs(est.value / math.exp(math.e - 1) - 1) <= 0.05

    def test_deterministic(self):
        assert permutation_mgf(20, 2500, 4) == permutation_mgf(20, 2500, 4)


class TestBoundary:
    def test_beta_star(self):
        assert beta_star(1 / 3) == 1 / 3
        assert beta_star(1.0) == 0.5
        assert beta_star(0.0) == 0.0
        with pytest.raises(InvalidInputError):
            beta_star(1.5)

    def test_large_k_forms_agree(self):
        p = 2**12
        k = 1000
        assert lambda0(p, k)[0] == lambda1(p, k)

    def test_ordering_and_ratio(self):
        for e in range(8, 21):
            p = 2**e
            bound = 3 * math.sqrt(math.log(p) / math.log(math.log(p)))
            for k in np.unique(np.geomspace(4, p, 60).astype(int)):
                pt = boundary_curves(p, int(k))
                assert 0 < pt.lambda0 <= pt.lambda1
                assert pt.lambda1 / pt.lambda0 <= bound

    def test_cap_flag(self):
        p = 2**16
        k = 40  # between (p/log p)^(1/3) and (p log p)^(1/3)
        raw = boundary_curves(p, k, cap=False)
        capped = boundary_curves(p, k)
        assert raw.lambda0 > raw.lambda1
        assert capped.capped and capped.lambda0 == capped.lambda1

    def test_literal_form(self):
        p = 2**16
        k = math.floor((p * math.log(p)) ** (1 / 3))
        lit, clamped = lambda0(p, k, with_e=False)
        assert not clamped and lit < 0.2 * lambda0(p, k)[0]
        assert lambda0(p, 3, with_e=False)[0] < lambda0(p, 3)[0]

    def test_point_fields(self):
        assert isinstance(boundary_curves(100, 3), BoundaryPoint)

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            lambda1(1, 1)
        with pytest.raises(InvalidInputError):
            lambda0(10, 11)
