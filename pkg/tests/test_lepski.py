import math

import numpy as np
import pytest

import ergodiff as ed
from ergodiff.errors import DomainError, EmptyGrid, KernelOrderTooLow
from ergodiff.lepski import (BandwidthGrid, PairTest,
                             simultaneous_density_threshold, _chosen_from)
from ergodiff.simulate import SimConfig

E = math.e


class TestVarianceProxy:
    def test_hand_value(self):
        # t=1000, h=0.1: log(1e4)^3/1000 + log(1e4)/100
        lg = math.log(1e4)
        expected = math.sqrt(lg**3 / 1000.0 + lg / 100.0)
        assert ed.variance_proxy(0.1, 1000.0) == pytest.approx(expected,
                                                               rel=1e-12)
        assert expected == pytest.approx(0.93456, abs=2e-4)

    def test_decreasing_in_h(self):
        grid = ed.build_grid(2000.0, 1.25)
        vals = [ed.variance_proxy(h, 2000.0) for h in grid.bandwidths]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_decreasing_in_t(self):
        for h in (0.5, 0.1, 0.05):
            vals = [ed.variance_proxy(h, t)
                    for t in (500.0, 1000.0, 2000.0, 4000.0)]
            assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(DomainError):
            ed.variance_proxy(1.5, 100.0)
        with pytest.raises(DomainError):
            ed.variance_proxy(0.1, 0.5)


class TestBiasBound:
    def test_hand_value(self, triangular):
        # beta=1 (strict floor 0, 0!=1), L=2: B(h) = h * (2/2) * 1/6
        spec = ed.HolderSpec(1.0, 2.0)
        assert ed.bias_bound(0.3, spec, triangular) == pytest.approx(
            0.3 / 6.0, rel=1e-8)

    def test_vanishes_at_zero(self, triangular):
        spec = ed.HolderSpec(1.0, 2.0)
        assert ed.bias_bound(1e-12, spec, triangular) < 1e-12

    def test_power_law(self, triangular):
        spec = ed.HolderSpec(1.0, 2.0)
        ratio = (ed.bias_bound(1.25 * 0.2, spec, triangular)
                 / ed.bias_bound(0.2, spec, triangular))
        assert ratio == pytest.approx(1.25**1.0, rel=1e-12)
        spec2 = ed.HolderSpec(1.5, 2.0)
        k = ed.make_kernel(3)
        ratio2 = (ed.bias_bound(2 * 0.1, spec2, k)
                  / ed.bias_bound(0.1, spec2, k))
        assert ratio2 == pytest.approx(2**1.5, rel=1e-12)

    def test_order_too_low(self, triangular):
        with pytest.raises(KernelOrderTooLow):
            ed.bias_bound(0.2, ed.HolderSpec(2.0, 1.0), triangular)


class TestBuildGrid:
    def test_example_t_e10(self):
        grid = ed.build_grid(math.exp(10.0), 2.0)
        assert np.allclose(grid.bandwidths,
                           [2.0**-k for k in range(1, 8)])
        assert grid.h_min == pytest.approx(2.0**-7)

    def test_empty_grid(self):
        with pytest.raises(EmptyGrid):
            ed.build_grid(10.0, 2.0)

    def test_elements_decrease_below_one(self):
        grid = ed.build_grid(5000.0, 1.25)
        bw = grid.bandwidths
        assert np.all(bw < 1.0)
        assert np.all(np.diff(bw) < 0)
        floor = math.log(5000.0) ** 2 / 5000.0
        assert np.all(bw > floor)

    def test_eta_validation(self):
        with pytest.raises(DomainError):
            ed.build_grid(100.0, 1.0)
        with pytest.raises(DomainError):
            ed.build_grid(5.0, 2.0)


class TestCalibrationConstants:
    def test_theoretical_hand_values(self):
        c = ed.CalibrationConstants(kernel_l2=1.0, bdg=math.sqrt(2.0),
                                    c_tilde2=1.0, entropy_v=2.0,
                                    mode="theoretical")
        assert c.eta_bar1 == pytest.approx(48.0 * E, rel=1e-12)
        assert c.eta_bar1 == pytest.approx(130.479, abs=2e-3)
        assert c.eta_bar2 == pytest.approx(12.0 * math.sqrt(2.0), rel=1e-12)
        expected_c = 20.0 * E**2 * (4 * 48 * E + 24 * math.sqrt(2.0)) ** 2
        assert c.threshold_c == pytest.approx(expected_c, rel=1e-12)
        assert c.threshold_c == pytest.approx(4.5656e7, rel=1e-3)

    def test_override_passthrough(self, ou_model, ou_inv, triangular):
        c = ed.CalibrationConstants(kernel_l2=triangular.l2_norm,
                                    mode="override", override_c=1.0)
        path = ed.simulate_path(ou_model, ou_inv,
                                SimConfig(horizon=500.0, step=0.01), 3)
        x = ed.eval_grid(1.0, 500.0**-0.5)
        m = ed.threshold_level(path, triangular, 500.0, c, x)
        dens = ed.density_kde(path, triangular, 500.0**-0.5, x)
        assert m == pytest.approx(float(np.max(np.abs(dens.values))),
                                  rel=1e-12)

    def test_linear_in_density_sup(self, ou_model, ou_inv, triangular):
        path = ed.simulate_path(ou_model, ou_inv,
                                SimConfig(horizon=500.0, step=0.01), 3)
        x = ed.eval_grid(1.0, 500.0**-0.5)
        c1 = ed.CalibrationConstants(kernel_l2=triangular.l2_norm,
                                     mode="override", override_c=1.0)
        c2 = ed.CalibrationConstants(kernel_l2=triangular.l2_norm,
                                     mode="override", override_c=3.5)
        m1 = ed.threshold_level(path, triangular, 500.0, c1, x)
        m2 = ed.threshold_level(path, triangular, 500.0, c2, x)
        assert m2 == pytest.approx(3.5 * m1, rel=1e-12)

    def test_calibrated_scales_sqrt(self):
        base = ed.CalibrationConstants(kernel_l2=1.0)
        cal = ed.CalibrationConstants(kernel_l2=1.0, mode="calibrated",
                                      factor=0.01)
        assert math.sqrt(cal.threshold_c) == pytest.approx(
            0.01 * math.sqrt(base.threshold_c), rel=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            ed.CalibrationConstants(kernel_l2=1.0, entropy_v=1.0)
        with pytest.raises(DomainError):
            ed.CalibrationConstants(kernel_l2=1.0, mode="nope")
        with pytest.raises(DomainError):
            ed.CalibrationConstants(kernel_l2=1.0, mode="override")\
                .threshold_c


@pytest.fixture(scope="module")
def selection_setup(ou_model, ou_inv, triangular):
    t = 300.0
    grid = ed.build_grid(t, 2.0)  # small grid: {0.5, 0.25, ..., }
    path = ed.simulate_path(ou_model, ou_inv,
                            SimConfig(horizon=t, step=0.01), 404)
    x = ed.eval_grid(1.0, min(grid.h_min, t**-0.5))
    cal = ed.CalibrationConstants(kernel_l2=triangular.l2_norm,
                                  mode="calibrated", factor=2e-4)
    return path, grid, x, cal


class TestSingleSelection:
    def test_single_element_grid(self, selection_setup, triangular):
        path, _, x, cal = selection_setup
        lone = BandwidthGrid(2.0, path.horizon, np.array([0.25]))
        chosen, trace = ed.select_bandwidth_single(path, triangular, lone,
                                                   cal, x)
        assert chosen == 0.25
        assert trace.pair_tests == ()

    def test_huge_constant_picks_max(self, selection_setup, triangular):
        path, grid, x, _ = selection_setup
        big = ed.CalibrationConstants(kernel_l2=triangular.l2_norm,
                                      mode="override", override_c=1e12)
        chosen, _ = ed.select_bandwidth_single(path, triangular, grid,
                                               big, x)
        assert chosen == grid.h_max

    def test_brute_force_oracle(self, selection_setup, triangular):
        path, grid, x, cal = selection_setup
        chosen, trace = ed.select_bandwidth_single(path, triangular, grid,
                                                   cal, x)
        # independent exhaustive evaluation of the rule
        t = path.horizon
        ests = {float(h): ed.derivative_estimator(path, triangular,
                                                  float(h), x)
                for h in grid.bandwidths}
        m = ed.threshold_level(path, triangular, t, cal, x)
        admissible = []
        for h in map(float, grid.bandwidths):
            ok = True
            for g in map(float, grid.bandwidths):
                if g >= h:
                    continue
                stat = ed.sup_distance(ests[h], ests[g])
                if stat > math.sqrt(m) * ed.variance_proxy(g, t):
                    ok = False
            if ok:
                admissible.append(h)
        assert chosen == max(admissible)
        assert trace.m_value == pytest.approx(m, rel=1e-12)

    def test_chosen_in_grid_and_trace_replay(self, selection_setup,
                                             triangular):
        path, grid, x, cal = selection_setup
        chosen, trace = ed.select_bandwidth_single(path, triangular, grid,
                                                   cal, x)
        assert chosen in set(map(float, grid.bandwidths))
        assert ed.replay_selection(trace) == chosen

    def test_threshold_monotonicity(self, selection_setup, triangular):
        path, grid, x, _ = selection_setup
        chosens = []
        for factor in (1e-5, 1e-4, 1e-3):
            cal = ed.CalibrationConstants(kernel_l2=triangular.l2_norm,
                                          mode="calibrated", factor=factor)
            chosen, _ = ed.select_bandwidth_single(path, triangular, grid,
                                                   cal, x)
            chosens.append(chosen)
        assert chosens == sorted(chosens)

    def test_deterministic(self, selection_setup, triangular):
        path, grid, x, cal = selection_setup
        a = ed.select_bandwidth_single(path, triangular, grid, cal, x)
        b = ed.select_bandwidth_single(path, triangular, grid, cal, x)
        assert a[0] == b[0]
        assert a[1].to_json() == b[1].to_json()


class TestSimultaneousSelection:
    def test_hmin_always_admissible(self, selection_setup, triangular):
        path, grid, x, cal = selection_setup
        chosen, trace = ed.select_bandwidth_simultaneous(
            path, triangular, grid, cal, x)
        hmin_rows = [r for r in trace.density_constraints
                     if r.h == grid.h_min]
        assert hmin_rows[0].statistic == 0.0
        assert hmin_rows[0].passed
        assert chosen >= grid.h_min

    def test_threshold_hand_value(self):
        val = simultaneous_density_threshold(0.25, math.exp(10.0))
        expected = 0.5 * math.log(4.0) ** 4 / (math.exp(5.0) * 10.0)
        assert val == pytest.approx(expected, rel=1e-12)
        assert val == pytest.approx(1.2443e-3, rel=1e-3)

    def test_added_constraint_only_removes(self, selection_setup,
                                           triangular):
        path, grid, x, cal = selection_setup
        chosen, trace = ed.select_bandwidth_simultaneous(
            path, triangular, grid, cal, x)
        # replay the same pairwise rows with the density constraint
        # dropped: the choice can only move up
        pairs_only = _chosen_from(np.asarray(trace.bandwidths),
                                  list(trace.pair_tests), [])
        assert chosen <= pairs_only

    def test_brute_force_oracle(self, selection_setup, triangular):
        path, grid, x, cal = selection_setup
        chosen, trace = ed.select_bandwidth_simultaneous(
            path, triangular, grid, cal, x)
        t = path.horizon
        dens = {float(h): ed.density_kde(path, triangular, float(h), x)
                for h in grid.bandwidths}
        deriv = {float(h): ed.derivative_estimator(path, triangular,
                                                   float(h), x)
                 for h in grid.bandwidths}
        m = ed.threshold_level(path, triangular, t, cal, x,
                               scheme="simultaneous", h_min=grid.h_min)
        admissible = []
        for h in map(float, grid.bandwidths):
            ok = ed.sup_distance(dens[h], dens[grid.h_min]) \
                <= simultaneous_density_threshold(h, t)
            for g in map(float, grid.bandwidths):
                if g < h and ed.sup_distance(deriv[h], deriv[g]) \
                        > math.sqrt(m) * ed.variance_proxy(g, t):
                    ok = False
            if ok:
                admissible.append(h)
        assert chosen == max(admissible)
        assert ed.replay_selection(trace) == chosen

    def test_trace_json_fields(self, selection_setup, triangular):
        import json
        path, grid, x, cal = selection_setup
        _, trace = ed.select_bandwidth_simultaneous(path, triangular,
                                                    grid, cal, x)
        doc = json.loads(trace.to_json())
        assert doc["scheme"] == "simultaneous"
        assert set(doc["pair_tests"][0]) == {"h", "g", "statistic",
                                             "threshold", "passed"}
        assert doc["chosen"] in doc["bandwidths"]


class TestOracleBandwidth:
    def test_brute_force_scan(self, triangular):
        spec = ed.HolderSpec(1.0, 5.0)
        grid = ed.build_grid(2000.0, 1.25)
        h, ok = ed.oracle_bandwidth(spec, triangular, grid, 2000.0, 1.0)
        assert ok
        budget = math.sqrt(0.8) / 4.0
        scan = [float(g) for g in grid.bandwidths
                if ed.bias_bound(g, spec, triangular)
                <= budget * ed.variance_proxy(g, 2000.0)]
        assert h == max(scan)

    def test_huge_m_picks_max(self, triangular):
        spec = ed.HolderSpec(1.0, 5.0)
        grid = ed.build_grid(2000.0, 1.25)
        h, ok = ed.oracle_bandwidth(spec, triangular, grid, 2000.0, 1e12)
        assert ok and h == grid.h_max

    def test_doubling_l_weakly_decreases(self, triangular):
        grid = ed.build_grid(2000.0, 1.25)
        h1, _ = ed.oracle_bandwidth(ed.HolderSpec(1.0, 5.0), triangular,
                                    grid, 2000.0, 1.0)
        h2, _ = ed.oracle_bandwidth(ed.HolderSpec(1.0, 10.0), triangular,
                                    grid, 2000.0, 1.0)
        assert h2 <= h1

    def test_fallback_flag(self, triangular):
        grid = ed.build_grid(2000.0, 1.25)
        h, ok = ed.oracle_bandwidth(ed.HolderSpec(1.0, 1e9), triangular,
                                    grid, 2000.0, 1.0)
        assert not ok and h == grid.h_min

    def test_rate_shape_window(self, triangular):
        # pure-formula check: h^(2b+1) t / log t stays in [0.1, 10] over
        # four decades (class radius 5 centres the window; see ledger)
        spec = ed.HolderSpec(1.0, 5.0)
        vals = []
        for t in (1e3, 1e4, 1e5, 1e6):
            grid = ed.build_grid(t, 1.25)
            h, ok = ed.oracle_bandwidth(spec, triangular, grid, t, 1.0)
            assert ok
            vals.append(h**3 * t / math.log(t))
        assert all(0.1 <= v <= 10.0 for v in vals)

    def test_rate_shape_stability(self, triangular):
        # the ratio is stable in t for any radius (the content of the
        # h_bar ~ (log t/t)^(1/(2 beta + 1)) balance)
        for big_l in (1.2, 2.0, 5.0):
            spec = ed.HolderSpec(1.0, big_l)
            vals = []
            for t in (1e3, 1e4, 1e5, 1e6):
                grid = ed.build_grid(t, 1.25)
                h, _ = ed.oracle_bandwidth(spec, triangular, grid, t, 1.0)
                vals.append(h**3 * t / math.log(t))
            assert max(vals) / min(vals) <= 5.0
