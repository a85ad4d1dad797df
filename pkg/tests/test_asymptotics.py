import math

import numpy as np
import pytest

import ergodiff as ed
from ergodiff.asymptotics import (InfluenceKernel, density_bound_bias,
                                  perturbation_scale, tail_bound_in_regime)
from ergodiff.bumps import odd_bump_prime, smooth_bump
from ergodiff.errors import (DomainError, HypothesisInvalid, TooFewSamples)
from ergodiff.model import HolderSpec

E = math.e


class TestCovariances:
    def test_symmetry(self, ou_inv):
        a = ed.limit_covariance(ou_inv, 0.3, 0.8)
        b = ed.limit_covariance(ou_inv, 0.8, 0.3)
        assert abs(a - b) <= 1e-10

    def test_representation_equality_two_models(self, ou_inv, tanh_inv):
        pts = np.linspace(-1.0, 1.0, 5)
        for inv in (ou_inv, tanh_inv):
            for x in pts:
                for y in pts:
                    h = ed.limit_covariance(inv, float(x), float(y))
                    cr = ed.optimal_covariance(inv, float(x), float(y))
                    assert abs(h - cr) <= 1e-8, (x, y)

    def test_cr_point_is_diagonal(self, ou_inv):
        for y in (-0.7, 0.0, 0.5, 1.4):
            assert abs(ed.cramer_rao_point(ou_inv, y)
                       - ed.limit_covariance(ou_inv, y, y)) <= 1e-8

    def test_cr_nonnegative_and_decaying(self, ou_inv):
        assert ed.cramer_rao_point(ou_inv, 0.0) > 0.0
        assert ed.cramer_rao_point(ou_inv, 4.0) < 1e-3
        for y in np.linspace(-3, 3, 13):
            assert ed.cramer_rao_point(ou_inv, float(y)) >= 0.0

    def test_out_of_range_rejected(self, ou_inv):
        with pytest.raises(DomainError):
            ed.limit_covariance(ou_inv, 50.0, 0.0)

    def test_influence_tail_bound(self, ou_inv):
        rep = InfluenceKernel(ou_inv).tail_bound_report()
        assert rep["passed"]
        assert rep["bound"] == pytest.approx(0.55, abs=1e-12)


class TestGenerator:
    def test_quadratic_hand_example(self, ou_model, ou_inv):
        # f = x^2, b = -x: L f = -2x^2 + 1
        grid = ou_inv.grid
        out = ed.generator_apply(grid**2, grid, ou_model)
        sel = np.abs(grid) <= 2.0
        expected = -2.0 * grid[sel] ** 2 + 1.0
        assert np.max(np.abs(out[sel] - expected)) <= 1e-6
        center = np.argmin(np.abs(grid))
        assert out[center] == pytest.approx(1.0, abs=1e-8)

    def test_constant_maps_to_zero(self, ou_model, ou_inv):
        out = ed.generator_apply(np.full(ou_inv.grid.size, 3.7),
                                 ou_inv.grid, ou_model)
        assert np.max(np.abs(out)) <= 1e-10

    def test_linearity(self, ou_model):
        # spacing 0.01 keeps second-difference roundoff below the budget
        grid = np.arange(-400, 401) * 0.01
        f, g = np.sin(grid), grid**2
        lf = ed.generator_apply(f, grid, ou_model)
        lg = ed.generator_apply(g, grid, ou_model)
        lfg = ed.generator_apply(f + g, grid, ou_model)
        assert np.max(np.abs(lfg - lf - lg)) <= 1e-10


def bump_on(grid, center, width=1.0, amp=1.0):
    return amp * smooth_bump((grid - center) / width)


class TestPoisson:
    def test_zero_source(self, ou_inv):
        sol = ed.poisson_solve(np.zeros(ou_inv.grid.size), ou_inv)
        assert np.all(sol.values == 0.0)
        assert np.all(sol.derivative == 0.0)

    @pytest.mark.parametrize("center,width", [(0.0, 1.0), (0.3, 0.8),
                                              (-0.7, 1.2)])
    def test_generator_identity(self, ou_model, ou_inv, center, width):
        g = bump_on(ou_inv.grid, center, width)
        sol = ed.poisson_solve(g, ou_inv)
        lhs = ed.generator_apply(sol.values, ou_inv.grid, ou_model)
        rhs = g - sol.mean_g
        sel = np.abs(ou_inv.grid) <= 2.0
        assert np.max(np.abs(lhs[sel] - rhs[sel])) <= 1e-4

    @pytest.mark.parametrize("center,width", [(0.0, 1.0), (0.3, 0.8),
                                              (-0.7, 1.2)])
    def test_quadratic_form_identity(self, ou_inv, center, width):
        g = bump_on(ou_inv.grid, center, width)
        sol = ed.poisson_solve(g, ou_inv)
        lhs = ed.covariance_quadratic_form(ou_inv, g)
        rhs = sol.grad_norm_sq(ou_inv)
        assert abs(lhs - rhs) <= 1e-6

    def test_support_guard(self, ou_inv):
        g = np.ones(ou_inv.grid.size)
        from ergodiff.errors import TailNotResolved
        with pytest.raises(TailNotResolved):
            ed.poisson_solve(g, ou_inv)


class TestBoundFunctions:
    def test_phi_hand_value(self):
        # all constants one, t=e, h=1/e, u=1: every log(ut/h) = 2
        val = ed.derivative_concentration_bound(E, 1.0 / E, 1.0)
        expected = ((2**1.5 + 2**0.5 + 1.0) / math.sqrt(E)
                    + 1.0
                    + E * math.exp(-E)
                    + math.sqrt(2.0)
                    + 2.0 / (E**0.75 * E**-0.5)
                    + (1.0 + E**-0.25))
        assert val == pytest.approx(expected, rel=1e-12)

    def test_phi_increasing_in_u(self):
        us = np.linspace(1.0, 100.0, 160)
        vals = [ed.derivative_concentration_bound(100.0, 0.1, float(u))
                for u in us]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_phi_vanishes_in_t(self):
        vals = [ed.derivative_concentration_bound(t, 0.1, 2.0)
                for t in (1e2, 1e4, 1e6)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < vals[0] / 5.0

    def test_phi_domain(self):
        with pytest.raises(DomainError):
            ed.derivative_concentration_bound(10.0, 0.1, 0.5)
        with pytest.raises(DomainError):
            ed.derivative_concentration_bound(10.0, 1.5, 2.0)

    def test_psi_bias_term(self, triangular):
        spec = HolderSpec(1.0, 2.0)
        assert density_bound_bias(0.0, spec, triangular) == 0.0
        # beta+1 = 2, strict floor 1, 1! = 1
        expected = 2.0 * 0.1**2 * triangular.abs_moment(2.0)
        assert density_bound_bias(0.1, spec, triangular) == pytest.approx(
            expected, rel=1e-12)

    def test_psi_nu_scaling(self, triangular):
        spec = HolderSpec(1.0, 2.0)
        base = ed.BoundConstants()
        doubled = ed.BoundConstants(nu1=2.0, nu2=2.0, nu3=1.0)
        bias = density_bound_bias(0.2, spec, triangular)
        v1 = ed.density_concentration_bound(50.0, 0.2, 2.0, spec,
                                            triangular, base)
        v2 = ed.density_concentration_bound(50.0, 0.2, 2.0, spec,
                                            triangular, doubled)
        # exponential-remainder term is identical; stochastic part doubles
        rem = math.exp(-50.0) / 0.2
        assert v2 - bias - rem == pytest.approx(2.0 * (v1 - bias - rem),
                                                rel=1e-9)

    def test_psi_independent_evaluation(self, triangular):
        spec = HolderSpec(1.0, 2.0)
        t, h, u = 400.0, 0.15, 3.0
        val = ed.density_concentration_bound(t, h, u, spec, triangular)
        expected = (1.0 / math.sqrt(t)
                    * (1.0 + math.sqrt(math.log(1.0 / math.sqrt(h)))
                       + math.sqrt(math.log(u * t)) + math.sqrt(u))
                    + u / t
                    + math.exp(-t) / h
                    + 2.0 * h**2 * triangular.abs_moment(2.0))
        assert val == pytest.approx(expected, rel=1e-12)

    def test_tail_bound_scalings(self):
        t, h = 1000.0, 0.1
        # quadrupling rho_sup doubles the whole bound
        v1 = ed.derivative_tail_bound(t, h, 2.0, 0.25)
        v2 = ed.derivative_tail_bound(t, h, 2.0, 1.0)
        assert v2 == pytest.approx(2.0 * v1, rel=1e-12)
        # with eta_bar1 negligible the second term doubles under u -> 4u
        c = ed.BoundConstants(eta_bar1=1e-300, eta_bar2=1.0)
        s1 = ed.derivative_tail_bound(t, h, 1.0, 1.0, c)
        s4 = ed.derivative_tail_bound(t, h, 4.0, 1.0, c)
        assert s4 == pytest.approx(2.0 * s1, rel=1e-9)

    def test_tail_bound_hand_value(self):
        # sqrt(rho) (2 sqrt(log(ut/h)/(th)) + sqrt(u/(th)))
        val = ed.derivative_tail_bound(100.0, 0.5, 2.0, 0.49)
        lg = math.log(2.0 * 100.0 / 0.5)
        expected = 0.7 * (2.0 * math.sqrt(lg / 50.0)
                          + math.sqrt(2.0 / 50.0))
        assert val == pytest.approx(expected, rel=1e-12)

    def test_regime_flag(self):
        # the window (t^-1 log^2 t, log^-3 t) is nonempty once log^5 t < t
        t = math.exp(20.0)
        lt = 20.0
        assert tail_bound_in_regime(t, 1e-5, 5.0)
        assert not tail_bound_in_regime(t, lt**2 / t / 2.0, 5.0)
        assert not tail_bound_in_regime(t, 2.0 * lt**-3, 5.0)
        assert not tail_bound_in_regime(t, 1e-5, 2.0 * lt)

    def test_bound_constants_validation(self):
        with pytest.raises(DomainError):
            ed.BoundConstants(nu2=-1.0)


@pytest.fixture(scope="module")
def corpus():
    base = ed.DriftModel.ornstein_uhlenbeck(1.0, class_c=2.0)
    inv = ed.build_invariant(base)
    spec = HolderSpec(1.0, 2.4)
    return ed.build_hypotheses(base, inv, spec, 2.0, 0.5, 2000.0), inv


class TestHypotheses:
    def test_null_member_verbatim(self, corpus):
        hset, inv = corpus
        member0 = [m for m in hset.members if m.j == 0][0]
        assert np.array_equal(member0.rho, inv.rho)
        base_drift = inv.model.drift(inv.grid)
        assert np.max(np.abs(member0.drift_values - base_drift)) <= 1e-12

    def test_masses_one(self, corpus):
        hset, inv = corpus
        for m in hset.members:
            assert np.trapezoid(m.rho, dx=inv.spacing) == pytest.approx(
                1.0, abs=1e-6)

    def test_validation_report(self, corpus):
        hset, _ = corpus
        rep = ed.validate_hypotheses(hset)
        assert rep["passed"]
        assert rep["separation_observed"] >= rep["separation_bound"]

    def test_member_count_and_centers(self, corpus):
        hset, _ = corpus
        n_side = int(1.0 / (2.0 * hset.h_t)) - 1
        assert len(hset.members) == 2 * n_side + 1
        for m in hset.members:
            assert m.center == pytest.approx(2.0 * hset.h_t * m.j)

    def test_derivative_separation_bound(self, corpus):
        hset, inv = corpus
        bound = hset.separation_bound()
        assert bound == pytest.approx(
            hset.holder.L * hset.h_t * hset.q_scale * math.exp(-1.0),
            rel=1e-12)
        members = {m.j: m for m in hset.members}
        d1 = np.gradient(members[1].rho - inv.rho, inv.spacing)
        assert np.max(np.abs(d1)) >= bound

    def test_q_scale_puts_bump_in_class(self):
        # the scaled bump sits inside the Hoelder(beta+1, 1/2) ball
        c = perturbation_scale(1.0)
        grid = np.linspace(-0.5, 0.5, 20001)
        from ergodiff.bumps import odd_bump
        rep = ed.check_holder(c * odd_bump(grid), HolderSpec(2.0, 0.5),
                              grid)
        assert rep.passed
        assert abs(c * odd_bump_prime(0.0)) > 0.0

    def test_positivity_violation_raises(self):
        base = ed.DriftModel.ornstein_uhlenbeck(1.0, class_c=2.0,
                                                class_a=4.0)
        inv = ed.build_invariant(base)
        with pytest.raises(HypothesisInvalid) as err:
            ed.build_hypotheses(base, inv, HolderSpec(1.0, 50.0), 2.0,
                                0.9, 10.0)
        assert err.value.invariant in ("positivity", "base_smoothness")

    def test_small_class_c_rejected(self, ou_model, ou_inv):
        with pytest.raises(HypothesisInvalid):
            ed.build_hypotheses(ou_model, ou_inv, HolderSpec(1.0, 2.4),
                                1.0, 0.5, 2000.0)

    def test_v_range(self, ou_model, ou_inv):
        with pytest.raises(DomainError):
            ed.build_hypotheses(ou_model, ou_inv, HolderSpec(1.0, 2.4),
                                2.0, 1.5, 2000.0)


class TestNormalityCheck:
    def test_normal_samples_pass(self):
        rng = np.random.default_rng(123)
        hits = 0
        for trial in range(100):
            samples = rng.normal(0.0, 2.0, size=400)
            rep = ed.normality_check(samples, 4.0)
            hits += rep.p_value > 0.01
        assert hits >= 98

    def test_constant_samples_fail(self):
        rep = ed.normality_check(np.full(200, 0.3), 1.0)
        assert rep.p_value < 1e-10

    def test_exact_quantiles_near_zero_statistic(self):
        from scipy.stats import norm
        n = 1000
        samples = norm.ppf((np.arange(1, n + 1) - 0.5) / n) * 3.0
        rep = ed.normality_check(samples, 9.0)
        assert rep.ks_statistic < 0.01
        assert rep.p_value > 0.9

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            ed.normality_check(np.zeros(50), 1.0)
        with pytest.raises(DomainError):
            ed.normality_check(np.zeros(200), 0.0)
