"""Command-line interface.

Subcommands: simulate, estimate, select, mc, efficiency, lowerbound,
bounds.  Global flags: --config FILE, --seed U64, --out DIR, --threads N,
--format {json,csv}.  Exit codes: 0 success, 1 validation/usage error,
2 runtime failure.  Every run writes a manifest (config hash, seed,
versions) next to its outputs.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import report as rpt
from .asymptotics import (density_concentration_bound,
                          derivative_concentration_bound,
                          derivative_tail_bound, tail_bound_in_regime)
from .config import config_hash, load_config
from .errors import DomainError, ErgodiffError
from .estimators import (default_local_time_eps, density_kde,
                         derivative_estimator, drift_estimator, eval_grid,
                         local_time_estimator)
from .harness import (derive_seed, fit_rate, run_efficiency_study,
                      run_lowerbound_corpus, run_mc_risk)
from .lepski import (build_grid, select_bandwidth_simultaneous,
                     select_bandwidth_single)
from .model import build_invariant
from .simulate import (SimConfig, read_path_binary, simulate_path,
                       write_path_binary, write_path_csv)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    parser = _Parser(prog="ergodiff",
                     description="Scalar ergodic diffusion estimation "
                                 "toolkit")
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="YAML config file")
    common.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("json", "csv"), default="csv")

    sub = parser.add_subparsers(dest="command")
    p = sub.add_parser("simulate", parents=[common],
                       help="write one sample path")
    p.add_argument("--horizon", type=float, default=None)

    p = sub.add_parser("estimate", parents=[common],
                       help="run one estimator on a path")
    p.add_argument("--path", default=None,
                   help="binary path file; simulated if omitted")
    p.add_argument("--estimator", default="density",
                   choices=("density", "derivative", "drift", "localtime"))
    p.add_argument("--bandwidth", type=float, default=None)

    p = sub.add_parser("select", parents=[common],
                       help="run the bandwidth selection rule")
    p.add_argument("--path", default=None)
    p.add_argument("--scheme", default="single",
                   choices=("single", "simultaneous"))

    sub.add_parser("mc", parents=[common], help="Monte Carlo risk study")
    sub.add_parser("efficiency", parents=[common],
                   help="limit-variance / normality study")
    sub.add_parser("lowerbound", parents=[common],
                   help="build and validate the hypothesis corpus")

    p = sub.add_parser("bounds", parents=[common],
                       help="tabulate the concentration bound functions")
    p.add_argument("--u", type=float, default=1.0)
    return parser


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.threads != 1:
        cfg = replace(cfg, threads=args.threads)
    digest = config_hash(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, digest, out


def _cmd_simulate(args):
    cfg, digest, out = _prepare(args)
    inv = build_invariant(cfg.model)
    horizon = args.horizon if args.horizon else cfg.t_grid[-1]
    sim = SimConfig(horizon=horizon, step=cfg.step, init_kind=cfg.init,
                    init_value=cfg.init_value)
    seed = derive_seed(cfg.master_seed, 0)
    path = simulate_path(cfg.model, inv, sim, seed)
    write_path_binary(path, out / "path.bin")
    if args.format == "csv":
        write_path_csv(path, out / "path.csv")
    inv.export_csv(out / "invariant.csv")
    rpt.write_manifest(out, cfg.master_seed, args.config, digest,
                       {"command": "simulate", "horizon": horizon,
                        "path_seed": seed})
    return 0


def _load_or_simulate(args, cfg, inv):
    if args.path:
        return read_path_binary(args.path)
    sim = SimConfig(horizon=cfg.t_grid[-1], step=cfg.step,
                    init_kind=cfg.init, init_value=cfg.init_value)
    return simulate_path(cfg.model, inv, sim,
                         derive_seed(cfg.master_seed, 0))


def _cmd_estimate(args):
    cfg, digest, out = _prepare(args)
    inv = build_invariant(cfg.model)
    path = _load_or_simulate(args, cfg, inv)
    t = path.horizon
    h = args.bandwidth if args.bandwidth else t ** -0.5
    grid = eval_grid(cfg.model.class_a, h, cfg.window_pad, cfg.spacing_cap)
    if args.estimator == "density":
        est = density_kde(path, cfg.kernel, h, grid)
        truth = inv.rho_at(grid)
    elif args.estimator == "derivative":
        est = derivative_estimator(path, cfg.kernel, h, grid)
        truth = cfg.model.drift(grid) * inv.rho_at(grid)
    elif args.estimator == "drift":
        num = derivative_estimator(path, cfg.kernel, h, grid)
        den = density_kde(path, cfg.kernel, t ** -0.5, grid)
        est = drift_estimator(num, den, t)
        truth = cfg.model.drift(grid)
    else:
        eps = default_local_time_eps(path.step)
        est = local_time_estimator(path, grid, eps)
        truth = inv.rho_at(grid)
    rpt.write_estimate_outputs(est, out, truth=truth, fmt=args.format,
                               name=args.estimator)
    rpt.write_manifest(out, cfg.master_seed, args.config, digest,
                       {"command": "estimate", "estimator": args.estimator,
                        "bandwidth": h, "horizon": t})
    return 0


def _cmd_select(args):
    cfg, digest, out = _prepare(args)
    inv = build_invariant(cfg.model)
    path = _load_or_simulate(args, cfg, inv)
    t = path.horizon
    grid = build_grid(t, cfg.eta)
    x = eval_grid(cfg.model.class_a, min(grid.h_min, t ** -0.5),
                  cfg.window_pad, cfg.spacing_cap)
    if args.scheme == "single":
        chosen, trace = select_bandwidth_single(path, cfg.kernel, grid,
                                                cfg.calibration, x)
    else:
        chosen, trace = select_bandwidth_simultaneous(
            path, cfg.kernel, grid, cfg.calibration, x)
    rpt.write_selection_outputs(trace, out)
    rpt.write_manifest(out, cfg.master_seed, args.config, digest,
                       {"command": "select", "scheme": args.scheme,
                        "chosen": chosen, "horizon": t})
    return 0


def _cmd_mc(args):
    cfg, digest, out = _prepare(args)
    report = run_mc_risk(cfg)
    fits = {}
    for target, variant in (("density", "universal"),
                            ("derivative", "selected"),
                            ("derivative", "oracle"),
                            ("drift", "selected")):
        try:
            fit = fit_rate(report, target, variant, cfg.holder.beta)
        except (KeyError, ErgodiffError):
            continue
        fits[f"{target}/{variant}"] = {
            "slope": fit.slope, "stderr": fit.stderr,
            "intercept": fit.intercept,
            "target_exponent": fit.target_exponent}
    report.meta["rate_fits"] = fits
    rpt.write_mc_outputs(report, out)
    rpt.write_manifest(out, cfg.master_seed, args.config, digest,
                       {"command": "mc"})
    return 0


def _cmd_efficiency(args):
    cfg, digest, out = _prepare(args)
    eff = run_efficiency_study(cfg)
    rpt.write_efficiency_outputs(eff, out)
    rpt.write_manifest(out, cfg.master_seed, args.config, digest,
                       {"command": "efficiency"})
    return 0


def _cmd_lowerbound(args):
    cfg, digest, out = _prepare(args)
    result = run_lowerbound_corpus(cfg)
    rpt.write_corpus_outputs(result, out)
    rpt.write_manifest(out, cfg.master_seed, args.config, digest,
                       {"command": "lowerbound"})
    return 0 if result.validation["passed"] else 2


def _cmd_bounds(args):
    cfg, digest, out = _prepare(args)
    inv = build_invariant(cfg.model)
    rho_sup = inv.sup_rho()
    rows = []
    for t in cfg.t_grid:
        grid = build_grid(t, cfg.eta)
        for h in map(float, grid.bandwidths):
            rows.append({
                "t": float(t), "h": h, "u": args.u,
                "derivative_bound": derivative_concentration_bound(
                    t, h, args.u, cfg.bounds),
                "density_bound": density_concentration_bound(
                    t, h, args.u, cfg.holder, cfg.kernel, cfg.bounds),
                "tail_bound": derivative_tail_bound(t, h, args.u, rho_sup,
                                                    cfg.bounds),
                "tail_in_regime": tail_bound_in_regime(t, h, args.u),
            })
    rpt.write_bounds_outputs(rows, out)
    rpt.write_manifest(out, cfg.master_seed, args.config, digest,
                       {"command": "bounds", "u": args.u})
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "select": _cmd_select,
    "mc": _cmd_mc,
    "efficiency": _cmd_efficiency,
    "lowerbound": _cmd_lowerbound,
    "bounds": _cmd_bounds,
}


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse -h/--help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (DomainError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except ErgodiffError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())
