"""Monte Carlo experiment driver: risk studies, rate fits, efficiency and
the lower-bound corpus.

Seeds: replication r at horizon t uses splitmix64 mixing of
(master_seed, round(1000 t), r), so any subset of the horizon grid can be
reproduced independently.  Replications are pure functions of their seed
and may run on any number of threads; reports are reduced over sorted
replication indices, so output is independent of scheduling.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import (build_hypotheses, cramer_rao_point,
                          normality_check, validate_hypotheses)
from .errors import DomainError, ErgodiffError, InsufficientHorizons
from .estimators import (density_kde, derivative_estimator,
                         drift_estimator, eval_grid, sup_distance,
                         weighted_drift_error)
from .lepski import (build_grid, oracle_bandwidth, replay_selection,
                     select_bandwidth_simultaneous, select_bandwidth_single,
                     simultaneous_density_threshold)
from .model import InvariantModel, build_invariant, donsker_diagnostics
from .simulate import SimConfig, simulate_path

_MASK = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_LOWERBOUND_SALT = 0x1B


def _splitmix64(x):
    x = (x + _GOLD) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master, *salts):
    """64-bit seed mixer (splitmix64 chain over the salts)."""
    x = master & _MASK
    for s in salts:
        x = _splitmix64(x ^ _splitmix64(s & _MASK))
    return x


def _horizon_salt(t):
    return int(round(1000.0 * t))


@dataclass(eq=False)
class Cell:
    """Per-(target, horizon, variant) aggregate over replications."""

    target: str
    t: float
    variant: str
    values: list

    @property
    def ok_values(self):
        return np.array([v for v in self.values if v is not None])

    @property
    def n_ok(self):
        return int(self.ok_values.size)

    @property
    def n_failed(self):
        return len(self.values) - self.n_ok

    @property
    def mean(self):
        v = self.ok_values
        return float(np.mean(v)) if v.size else float("nan")

    @property
    def stderr(self):
        v = self.ok_values
        if v.size < 2:
            return float("nan")
        return float(np.std(v, ddof=1) / math.sqrt(v.size))

    def to_dict(self):
        return {"target": self.target, "t": self.t, "variant": self.variant,
                "mean": self.mean, "stderr": self.stderr,
                "n_ok": self.n_ok, "n_failed": self.n_failed,
                "values": [v if v is None else float(v)
                           for v in self.values]}


@dataclass(eq=False)
class RiskReport:
    """All cells of one Monte Carlo run, plus run metadata."""

    cells: dict
    meta: dict = field(default_factory=dict)

    def cell(self, target, t, variant):
        return self.cells[(target, float(t), variant)]

    def variants(self, target, t):
        return sorted(v for (tg, tt, v) in self.cells
                      if tg == target and tt == float(t))

    def horizons(self, target):
        return sorted({tt for (tg, tt, _v) in self.cells if tg == target})

    def best_fixed(self, target, t):
        """(bandwidth, mean risk) of the best fixed-bandwidth comparator."""
        best = None
        for (tg, tt, variant), cell in self.cells.items():
            if tg != target or tt != float(t):
                continue
            if not variant.startswith("fixed:"):
                continue
            h = float(variant.split(":", 1)[1])
            if best is None or cell.mean < best[1]:
                best = (h, cell.mean)
        if best is None:
            raise KeyError("no fixed-bandwidth comparator cells")
        return best

    def to_dict(self):
        return {
            "meta": self.meta,
            "cells": [self.cells[k].to_dict()
                      for k in sorted(self.cells.keys())],
        }


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    intercept: float
    target_exponent: float
    n_horizons: int


def fit_rate(report, target, variant, beta):
    """OLS slope of log(mean risk) against log(log t / t).

    The benchmark exponent is beta/(2 beta + 1).
    """
    ts = report.horizons(target)
    pts = []
    for t in ts:
        key = (target, t, variant)
        if key in report.cells:
            m = report.cells[key].mean
            if math.isfinite(m) and m > 0:
                pts.append((t, m))
    if len(pts) < 3:
        raise InsufficientHorizons(f"{len(pts)} usable horizons")
    x = np.array([math.log(math.log(t) / t) for t, _ in pts])
    y = np.array([math.log(m) for _, m in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(1, x.size - 2)
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    return RateFit(float(slope), se, float(intercept),
                   beta / (2.0 * beta + 1.0), x.size)


def _grid_spec(config):
    if config.grid_radius is None:
        return None
    return (config.grid_radius, config.grid_spacing)


def _needs_selection(targets):
    return bool({"derivative", "drift", "simultaneous"} & set(targets))


def _mc_replication(config, inv, t, seed, bw_grid, x_density, x_select,
                    truths, oracle_h, truth_hook=False):
    """All per-replication metrics for one horizon; pure in (seed)."""
    model, kernel = config.model, config.kernel
    cfg = SimConfig(horizon=t, step=config.step, init_kind=config.init,
                    init_value=config.init_value)
    path = simulate_path(model, inv, cfg, seed)
    out = {}
    targets = config.targets
    h_univ = t ** -0.5

    if truth_hook:
        # bypass estimation entirely: feed the tabulated truth back in
        if "density" in targets:
            out[("density", "universal")] = 0.0
        for tgt in ("derivative", "drift", "simultaneous"):
            if tgt in targets:
                out[(tgt, "selected" if tgt != "simultaneous" else "drift")] \
                    = 0.0
        return out

    if "density" in targets:
        est = density_kde(path, kernel, h_univ, x_density)
        out[("density", "universal")] = sup_distance(est,
                                                     truths["rho_density"])

    if "oracle" in targets:
        # theory-driven bandwidth only; cheaper than running selection
        est = derivative_estimator(path, kernel, oracle_h,
                                   truths["x_oracle"])
        out[("oracle", "oracle")] = sup_distance(est,
                                                 truths["brho_oracle"])

    if _needs_selection(targets):
        deriv_ests = {float(h): derivative_estimator(path, kernel, float(h),
                                                     x_select)
                      for h in bw_grid.bandwidths}
        chosen, trace = select_bandwidth_single(
            path, kernel, bw_grid, config.calibration, x_select,
            deriv_estimates=deriv_ests)

        if "derivative" in targets:
            truth = truths["brho_select"]
            out[("derivative", "selected")] = sup_distance(
                deriv_ests[chosen], truth)
            out[("derivative", "oracle")] = sup_distance(
                deriv_ests[oracle_h], truth)
            for h in map(float, bw_grid.bandwidths):
                out[("derivative", f"fixed:{h:.10g}")] = sup_distance(
                    deriv_ests[h], truth)
            out[("derivative", "chosen_h")] = chosen
            out[("derivative", "replay_ok")] = float(
                replay_selection(trace) == chosen)

        if "drift" in targets or "simultaneous" in targets:
            den_univ = density_kde(path, kernel, h_univ, x_select)

        if "drift" in targets:
            bhat = drift_estimator(deriv_ests[chosen], den_univ, t)
            out[("drift", "selected")] = weighted_drift_error(bhat, model,
                                                              inv)

        if "simultaneous" in targets:
            sim_h, sim_trace, _, dens_ests = select_bandwidth_simultaneous(
                path, kernel, bw_grid, config.calibration, x_select,
                deriv_estimates=deriv_ests, return_estimates=True)
            out[("simultaneous", "chosen_h")] = sim_h
            out[("simultaneous", "replay_ok")] = float(
                replay_selection(sim_trace) == sim_h)
            gap = sup_distance(dens_ests[sim_h], dens_ests[bw_grid.h_min])
            out[("simultaneous", "density_gap_scaled")] = math.sqrt(t) * gap
            out[("simultaneous", "density_budget_scaled")] = (
                math.sqrt(t) * simultaneous_density_threshold(sim_h, t))
            out[("simultaneous", "density")] = sup_distance(
                dens_ests[sim_h], truths["rho_select"])
            btilde = drift_estimator(deriv_ests[sim_h], dens_ests[sim_h], t)
            out[("simultaneous", "drift")] = weighted_drift_error(
                btilde, model, inv)
            bsingle = drift_estimator(deriv_ests[chosen], den_univ, t)
            out[("simultaneous", "drift_single")] = weighted_drift_error(
                bsingle, model, inv)
    return out


def run_mc_risk(config, inv=None, truth_hook=False):
    """Run the Monte Carlo risk study described by the config.

    Per horizon t and replication r, a path is simulated with seed
    derived from (master_seed, t, r) and the selected targets are
    evaluated against the tabulated truth.  A failing replication is
    recorded (cell marked degraded), never silently dropped.
    """
    model = config.model
    if inv is None:
        inv = build_invariant(model, _grid_spec(config))
    meta = {"targets": list(config.targets),
            "master_seed": config.master_seed,
            "step": config.step, "eta": config.eta,
            "t_grid": [float(t) for t in config.t_grid],
            "replications": config.replications,
            "window_pad": config.window_pad,
            "spacing_cap": config.spacing_cap}
    if "donsker" in config.targets:
        d = donsker_diagnostics(inv)
        meta["donsker"] = {"cond_a": d.cond_a, "passed": d.passed,
                           "tail_last": d.tail_values[-1]}

    cells = {}

    def record(t, rep_outputs):
        keys = set()
        for out in rep_outputs:
            if out is not None:
                keys.update(out.keys())
        for (target, variant) in sorted(keys):
            vals = [None if out is None else out.get((target, variant))
                    for out in rep_outputs]
            cells[(target, float(t), variant)] = Cell(target, float(t),
                                                      variant, vals)
        if any(out is None for out in rep_outputs):
            meta.setdefault("degraded", []).append(
                {"t": float(t),
                 "failed": [i for i, o in enumerate(rep_outputs)
                            if o is None]})

    for t in config.t_grid:
        t = float(t)
        needs_sel = _needs_selection(config.targets)
        needs_grid = needs_sel or "oracle" in config.targets
        bw_grid = build_grid(t, config.eta) if needs_grid else None
        h_univ = t ** -0.5
        x_density = eval_grid(model.class_a, h_univ, config.window_pad,
                              config.spacing_cap)
        truths = {"rho_density": inv.rho_at(x_density)}
        x_select, oracle_h = None, None
        if needs_grid:
            oracle_h, oracle_ok = oracle_bandwidth(
                config.holder, config.kernel, bw_grid, t, config.oracle_m)
            meta.setdefault("oracle_bandwidths", {})[str(t)] = {
                "h": oracle_h, "qualified": oracle_ok}
        if "oracle" in config.targets:
            x_oracle = eval_grid(model.class_a, oracle_h, config.window_pad,
                                 config.spacing_cap)
            truths["x_oracle"] = x_oracle
            truths["brho_oracle"] = (model.drift(x_oracle)
                                     * inv.rho_at(x_oracle))
        if needs_sel:
            finest = min(bw_grid.h_min, h_univ)
            x_select = eval_grid(model.class_a, finest, config.window_pad,
                                 config.spacing_cap)
            truths["rho_select"] = inv.rho_at(x_select)
            truths["brho_select"] = (model.drift(x_select)
                                     * inv.rho_at(x_select))

        def one(r, t=t, bw_grid=bw_grid, x_density=x_density,
                x_select=x_select, truths=truths, oracle_h=oracle_h):
            seed = derive_seed(config.master_seed, _horizon_salt(t), r)
            try:
                return _mc_replication(config, inv, t, seed, bw_grid,
                                       x_density, x_select, truths,
                                       oracle_h, truth_hook)
            except ErgodiffError:
                return None

        reps = range(config.replications)
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                outputs = list(pool.map(one, reps))
        else:
            outputs = [one(r) for r in reps]
        record(t, outputs)

    return RiskReport(cells, meta)


@dataclass(eq=False)
class EfficiencyReport:
    """Monte Carlo law of sqrt(t) (rho_hat(x) - rho(x)) at fixed points,
    compared with the Cramer--Rao variance."""

    t: float
    points: tuple
    samples: np.ndarray
    mc_variance: tuple
    cr_variance: tuple
    ratio: tuple
    ks_statistic: tuple
    ks_pvalue: tuple

    def to_dict(self):
        return {"t": self.t, "points": list(self.points),
                "mc_variance": list(self.mc_variance),
                "cr_variance": list(self.cr_variance),
                "ratio": list(self.ratio),
                "ks_statistic": list(self.ks_statistic),
                "ks_pvalue": list(self.ks_pvalue),
                "n": int(self.samples.shape[0])}


def run_efficiency_study(config, t=None, inv=None):
    """Distributional check of the universal-bandwidth density estimator.

    For each evaluation point x the MC variance of
    sqrt(t) (rho_hat(t^(-1/2))(x) - rho(x)) is compared against the
    Cramer--Rao value CR(x, x); a KS normality check standardises by the
    CR variance.  Points whose CR value is below 1e-6 are degenerate and
    skipped (tail cells).
    """
    model = config.model
    if inv is None:
        inv = build_invariant(model, _grid_spec(config))
    if t is None:
        t = float(config.t_grid[-1])
    points = np.array(sorted(config.efficiency_points), dtype=float)
    h = t ** -0.5
    truth = inv.rho_at(points)
    n = config.replications

    def one(r):
        seed = derive_seed(config.master_seed, _horizon_salt(t), r)
        cfg = SimConfig(horizon=t, step=config.step,
                        init_kind=config.init,
                        init_value=config.init_value)
        path = simulate_path(model, inv, cfg, seed)
        # segment discretisation: the pinned step exceeds h^2 here, and the
        # left-endpoint sum would inflate the variance by step/h
        est = density_kde(path, config.kernel, h, points,
                          discretization="segment")
        return math.sqrt(t) * (est.values - truth)

    reps = range(n)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(one, reps))
    else:
        rows = [one(r) for r in reps]
    samples = np.vstack(rows)

    mc_var, cr_var, ratio, ks_s, ks_p = [], [], [], [], []
    for j, x in enumerate(points):
        col = samples[:, j]
        v = float(np.var(col, ddof=1))
        cr = cramer_rao_point(inv, float(x))
        mc_var.append(v)
        cr_var.append(cr)
        if cr < 1e-6:
            ratio.append(None)
            ks_s.append(None)
            ks_p.append(None)
        else:
            ratio.append(v / cr)
            rep = normality_check(col, cr)
            ks_s.append(rep.ks_statistic)
            ks_p.append(rep.p_value)
    return EfficiencyReport(t, tuple(map(float, points)), samples,
                            tuple(mc_var), tuple(cr_var), tuple(ratio),
                            tuple(ks_s), tuple(ks_p))


def jackknife_variance_of_variance(samples):
    """Leave-one-out jackknife variance of the sample-variance estimator."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 3:
        raise DomainError("need at least 3 samples")
    loo = np.array([np.var(np.delete(x, i), ddof=1) for i in range(n)])
    return float((n - 1) / n * np.sum((loo - loo.mean()) ** 2))


@dataclass(eq=False)
class CorpusResult:
    hypothesis_set: object
    validation: dict
    member_risks: dict
    worst_risk: float
    base_risk: float

    def to_dict(self):
        return {"validation": {k: (v if not isinstance(v, bool) else bool(v))
                               for k, v in self.validation.items()},
                "member_risks": {str(j): r
                                 for j, r in self.member_risks.items()},
                "worst_risk": self.worst_risk,
                "base_risk": self.base_risk,
                "h_t": self.hypothesis_set.h_t,
                "v": self.hypothesis_set.v,
                "t": self.hypothesis_set.t,
                "q_scale": self.hypothesis_set.q_scale,
                "centers": list(self.hypothesis_set.centers)}


def run_lowerbound_corpus(config, t=None, inv=None):
    """Build and validate the hypothesis corpus, then run the adaptive
    derivative estimator on one path per member (worst-case member risk is
    an empirical stand-in for the sup over the class)."""
    model = config.model
    if inv is None:
        inv = build_invariant(model, _grid_spec(config))
    if t is None:
        t = float(config.t_grid[-1])
    hset = build_hypotheses(model, inv, config.holder, model.class_c,
                            config.lowerbound_v, t)
    validation = validate_hypotheses(hset)

    bw_grid = build_grid(t, config.eta)
    x_select = eval_grid(model.class_a, bw_grid.h_min, config.window_pad,
                         config.spacing_cap)
    risks = {}
    for idx, member in enumerate(hset.members):
        inv_j = InvariantModel.from_density(inv.grid, member.rho,
                                            model=member.model)
        seed = derive_seed(config.master_seed, _LOWERBOUND_SALT, idx)
        cfg = SimConfig(horizon=t, step=config.step, init_kind=config.init,
                        init_value=config.init_value)
        path = simulate_path(member.model, inv_j, cfg, seed)
        chosen, _tr, ests = select_bandwidth_single(
            path, config.kernel, bw_grid, config.calibration, x_select,
            return_estimates=True)
        truth = member.model.drift(x_select) * inv_j.rho_at(x_select)
        risks[member.j] = sup_distance(ests[chosen], truth)
    worst = max(risks.values())
    return CorpusResult(hset, validation, risks, worst, risks[0])
