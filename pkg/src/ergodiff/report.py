"""Output writers: deterministic JSON/CSV reports plus rendered figures.

Every run directory gets a manifest (config hash, seed, versions).  JSON
files are written with sorted keys and no timestamps, so a report is a
pure function of (config, seed); figures are presentation artifacts and
carry no reproducibility contract.
"""

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

_FIG_DPI = 130


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_manifest(out_dir, seed, config_path=None, config_digest=None,
                   extra=None):
    import numba
    import scipy

    from . import __version__
    man = {
        "package": "ergodiff",
        "version": __version__,
        "seed": seed,
        "config_file": str(config_path) if config_path else None,
        "config_sha256": config_digest,
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__,
                     "numba": numba.__version__,
                     "python": platform.python_version()},
    }
    if extra:
        man.update(extra)
    write_json(man, Path(out_dir) / "manifest.json")


def _save(fig, path):
    fig.savefig(path, dpi=_FIG_DPI, metadata={"Date": None})
    import matplotlib.pyplot as plt
    plt.close(fig)


# -- mc risk reports -------------------------------------------------------

def write_mc_outputs(report, out_dir):
    """report.json, summary.csv, replications.csv and risk figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(report.to_dict(), out / "report.json")

    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "t", "variant", "mean", "stderr", "n_ok",
                    "n_failed"])
        for key in sorted(report.cells.keys()):
            c = report.cells[key]
            w.writerow([c.target, f"{c.t:.10g}", c.variant,
                        f"{c.mean:.17g}", f"{c.stderr:.17g}", c.n_ok,
                        c.n_failed])

    with open(out / "replications.csv", "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "t", "variant", "replication", "value"])
        for key in sorted(report.cells.keys()):
            c = report.cells[key]
            for r, v in enumerate(c.values):
                w.writerow([c.target, f"{c.t:.10g}", c.variant, r,
                            "" if v is None else f"{v:.17g}"])

    _mc_figures(report, out)
    return out


def _mc_figures(report, out):
    plt = _plt()
    targets = sorted({tg for (tg, _t, _v) in report.cells})
    for target in targets:
        ts = report.horizons(target)
        if len(ts) < 2:
            continue
        variants = [v for v in report.variants(target, ts[0])
                    if v in ("universal", "selected", "oracle", "drift",
                             "density")]
        if not variants:
            continue
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        for variant in variants:
            means = [report.cells[(target, t, variant)].mean for t in ts
                     if (target, t, variant) in report.cells]
            if len(means) == len(ts):
                ax.loglog(ts, means, "o-", label=variant)
        ax.set_xlabel("horizon t")
        ax.set_ylabel("mean sup-norm risk")
        ax.set_title(f"{target} risk")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        _save(fig, out / f"risk_{target}.png")


# -- other artifacts -------------------------------------------------------

def write_estimate_outputs(estimate, out_dir, truth=None, fmt="csv",
                           name="estimate"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        write_json({"x": estimate.x.tolist(),
                    "values": estimate.values.tolist(),
                    "bandwidth": estimate.bandwidth,
                    "horizon": estimate.horizon,
                    "tag": estimate.tag}, out / f"{name}.json")
    else:
        cols = [estimate.x, estimate.values]
        header = "x,value"
        if truth is not None:
            cols.append(truth)
            header += ",truth"
        np.savetxt(out / f"{name}.csv", np.column_stack(cols),
                   delimiter=",", header=header, comments="", fmt="%.17g")

    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(estimate.x, estimate.values, lw=1.0,
            label=f"{estimate.tag} (h={estimate.bandwidth:.4g})")
    if truth is not None:
        ax.plot(estimate.x, truth, "k--", lw=0.8, label="truth")
    ax.set_xlabel("x")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, out / f"{name}.png")
    return out


def write_selection_outputs(trace, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "selection_trace.json", "w", encoding="utf-8") as fh:
        fh.write(trace.to_json(indent=1))
        fh.write("\n")

    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    hs = [p.h for p in trace.pair_tests]
    stats = [p.statistic for p in trace.pair_tests]
    thrs = [p.threshold for p in trace.pair_tests]
    ax.loglog(hs, stats, "o", ms=3, label="pair statistic")
    ax.loglog(hs, thrs, "x", ms=3, label="threshold")
    ax.axvline(trace.chosen, color="k", lw=0.8,
               label=f"chosen h = {trace.chosen:.4g}")
    ax.set_xlabel("candidate bandwidth h")
    ax.set_title(f"{trace.scheme} selection, t = {trace.horizon:g}")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, out / "selection_trace.png")
    return out


def write_efficiency_outputs(eff, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(eff.to_dict(), out / "efficiency.json")
    with open(out / "efficiency.csv", "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "mc_variance", "cr_variance", "ratio",
                    "ks_statistic", "ks_pvalue"])
        for j, x in enumerate(eff.points):
            w.writerow([x, eff.mc_variance[j], eff.cr_variance[j],
                        eff.ratio[j], eff.ks_statistic[j],
                        eff.ks_pvalue[j]])

    plt = _plt()
    fig, axes = plt.subplots(1, len(eff.points),
                             figsize=(3.4 * len(eff.points), 3.2),
                             squeeze=False)
    for j, x in enumerate(eff.points):
        ax = axes[0][j]
        col = eff.samples[:, j]
        ax.hist(col, bins=30, density=True, alpha=0.6)
        if eff.cr_variance[j] > 1e-6:
            sd = math.sqrt(eff.cr_variance[j])
            grid = np.linspace(col.min(), col.max(), 200)
            ax.plot(grid, np.exp(-grid**2 / (2 * sd * sd))
                    / (sd * math.sqrt(2 * math.pi)), "k-", lw=1.0)
        ax.set_title(f"x = {x:g}", fontsize=9)
    fig.suptitle("sqrt(t)(estimate - truth) vs optimal normal", fontsize=9)
    fig.tight_layout()
    _save(fig, out / "efficiency.png")
    return out


def write_corpus_outputs(result, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hset = result.hypothesis_set
    grid = hset.base_inv.grid
    for member in hset.members:
        np.savetxt(out / f"member_{member.j:+03d}.csv",
                   np.column_stack([grid, member.rho, member.drift_values]),
                   delimiter=",", header="x,rho_j,b_j", comments="",
                   fmt="%.17g")
    write_json(result.to_dict(), out / "corpus.json")

    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    sel = np.abs(grid) <= hset.class_a + 1.0
    for member in hset.members:
        ax.plot(grid[sel], member.rho[sel], lw=0.6, alpha=0.7)
    ax.plot(grid[sel], hset.base_inv.rho[sel], "k--", lw=1.0, label="base")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title(f"hypothesis family, h_t = {hset.h_t:.4g}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out / "corpus.png")
    return out


def write_bounds_outputs(rows, out_dir):
    """rows: list of dicts with t, h, u and the three bound values."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fields = ["t", "h", "u", "derivative_bound", "density_bound",
              "tail_bound", "tail_in_regime"]
    with open(out / "bounds.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k) for k in fields})
    write_json({"rows": rows}, out / "bounds.json")

    plt = _plt()
    ts = sorted({r["t"] for r in rows})
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for key, style in (("derivative_bound", "o-"), ("density_bound", "s-"),
                       ("tail_bound", "^-")):
        ys = []
        for t in ts:
            sub = [r[key] for r in rows if r["t"] == t]
            ys.append(float(np.median(sub)))
        ax.loglog(ts, ys, style, ms=3, label=key)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, out / "bounds.png")
    return out
