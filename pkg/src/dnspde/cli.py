"""Command-line front end: ``dnspde <subcommand> [--config PATH] [--out DIR] ...``.

Every subcommand writes CSV tables (LF line endings, ``.`` decimals, header
row), a ``summary.txt`` of ``key=value`` lines, optional SVG figures and a
``manifest.json`` that records the resolved config, seed, version, wall
clock and the SHA-256 digest of every other output file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
import tempfile
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import checks
from . import diagnostics as dg
from . import energy as en
from . import monotone_graph as mg
from .config import ConfigError, RunConfig, parse_config, parse_text, serialize
from .stepper import SUMMARY_FIELDS, EnsembleResult, PathSummary, SimulationError, map_paths, simulate

SUBCOMMANDS = ("simulate", "sweep-lambda", "check-ito", "check-stability", "prox-test")


class Writer:
    """Collects the output files of one run."""

    def __init__(self, out: Path, plots: bool):
        self.out = out
        self.plots = plots
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name, header, rows):
        with open(self.out / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(x) for x in row])
        self.files.append(name)

    def summary(self, items: dict):
        with open(self.out / "summary.txt", "w", newline="\n", encoding="utf-8") as fh:
            for k, v in items.items():
                fh.write(f"{k}={_cell(v)}\n")
        self.files.append("summary.txt")

    def figure(self, name, *args, **kwargs):
        if not self.plots:
            return
        from .plotting import line_figure

        line_figure(self.out / name, *args, **kwargs)
        self.files.append(name)


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(w: Writer, subcommand: str, rc: RunConfig, started: float) -> dict:
    manifest = {
        "subcommand": subcommand,
        "version": __version__,
        "seed": rc["noise.seed"],
        "config": serialize(rc),
        "derived": {"dt": rc.sim.dt, "n_steps": rc.sim.n_steps},
        "wall_clock_seconds": round(time.time() - started, 3),
        "outputs": {name: sha256(w.out / name) for name in sorted(w.files)},
    }
    with open(w.out / "manifest.json", "w", newline="\n", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ------------------------------------------------------------------ subcommands


def _trajectory_blocks(rec, cfg, fields):
    return {f: getattr(rec, f) for f in fields}


def run_simulate(rc: RunConfig, w: Writer, workers: int, echo):
    cfg = rc.sim
    fields = rc["output.fields"]
    n = cfg.grid.n
    res = map_paths(cfg, _simulate_path, workers=workers)
    summaries = [r[0] for r in res]
    header = ["step", "t"] + [f"{f}_{i}" for f in fields for i in range(1, n + 1)]
    for k, (_, blocks, times) in enumerate(res):
        rows = []
        for s, t in enumerate(times):
            row = [s, t]
            for f in fields:
                arr = blocks[f]
                row.extend(arr[s] if s < len(arr) else [None] * n)
            rows.append(row)
        w.csv(f"trajectory_path{k}.csv", header, rows)
    w.csv(
        "paths.csv",
        ["path"] + list(SUMMARY_FIELDS),
        [[s.path_index] + [getattr(s, f) for f in SUMMARY_FIELDS] for s in summaries],
    )
    rep = dg.dissipation_report(cfg, workers=workers)
    w.csv(
        "energy.csv",
        ["step", "t", "mean_moreau", "mean_dissipation", "mean_forcing_work", "mean_half_trace", "gap_mean", "gap_se"],
        [
            [k, rep.times[k], rep.mean_moreau[k], rep.mean_dissipation[k], rep.mean_forcing_work[k],
             rep.mean_half_trace[k], rep.gap_mean[k], rep.gap_se[k]]
            for k in range(len(rep.times))
        ],
    )
    sens = dg.truncation_sensitivity(cfg, workers)
    ens = EnsembleResult.from_summaries(summaries)
    items = {"n_paths": cfg.n_paths, "dt": cfg.dt, "n_steps": cfg.n_steps}
    for f in SUMMARY_FIELDS:
        items[f"mean_{f}"] = ens.mean[f]
        items[f"se_{f}"] = ens.stderr[f]
    items["dissipation_inequality_ok"] = rep.inequality_ok
    items["coercivity_ok"] = rep.coercive_ok
    for f, v in sens.items():
        items[f"m_doubling_rel_change_{f}"] = v
    w.summary(items)
    w.figure(
        "energy.svg", rep.times,
        {"E moreau envelope": rep.mean_moreau, "E dissipation": rep.mean_dissipation,
         "E half trace": rep.mean_half_trace},
        "t", "energy",
    )
    echo(f"simulated {cfg.n_paths} paths x {cfg.n_steps} steps; dissipation inequality ok: {rep.inequality_ok}")
    return 0


def _simulate_path(rec, cfg, fields=("u", "du_d", "v")):
    return PathSummary.from_record(rec, cfg), _trajectory_blocks(rec, cfg, fields), rec.times


def run_sweep_lambda(rc: RunConfig, w: Writer, workers: int, echo):
    cfg = rc.sim
    if rc["diag.sweep_T"] is not None:
        cfg = cfg.with_(T=rc["diag.sweep_T"])
    rep = dg.apriori_sweep(cfg, rc["diag.lambdas"], rc["diag.ratio_bound"], workers=workers,
                           gamma_min=rc["diag.gamma_min"])
    w.csv(
        "apriori.csv",
        ["lambda", "dt"] + list(dg.APRIORI_FIELDS),
        [[r["lambda"], r["dt"]] + [r[f] for f in dg.APRIORI_FIELDS] for r in rep.rows],
    )
    cau = dg.lambda_cauchy(rc.sim, rc["diag.cauchy_lambdas"])
    lams = cau.lambdas
    w.csv(
        "cauchy.csv",
        ["k", "lambda_k", "lambda_k1", "error", "order"],
        [[k, lams[k], lams[k + 1], e, cau.orders[k - 1] if k > 0 else None] for k, e in enumerate(cau.errors)],
    )
    items = {"ratio_bound": rep.ratio_bound, "gamma_min": rc["diag.gamma_min"]}
    for f in dg.APRIORI_FIELDS:
        items[f"ratio_{f}"] = rep.ratios[f]
        items[f"growth_{f}"] = rep.growth[f]
    items["apriori_ok"] = rep.ok
    items["cauchy_dt"] = cau.dt
    items["cauchy_nonincreasing"] = cau.nonincreasing
    w.summary(items)
    lam_arr = np.array([r["lambda"] for r in rep.rows])
    w.figure("apriori.svg", lam_arr, {f: [r[f] for r in rep.rows] for f in dg.APRIORI_FIELDS},
             "lambda", "value", logx=True, logy=True, markers=True)
    w.figure("cauchy.svg", np.array(lams[1:]), {"e_k": cau.errors}, "lambda_{k+1}", "sup_n ||u_k - u_k+1||_H",
             logx=True, logy=True, markers=True)
    echo(f"a priori ok: {rep.ok}; cauchy nonincreasing: {cau.nonincreasing}")
    return 0


def run_check_ito(rc: RunConfig, w: Writer, workers: int, echo):
    cfg = rc.sim
    dts = rc["diag.dt_ladder"]
    rows = dg.ito_convergence(cfg, dts, workers=workers)
    res = [r.rms_sup_residual for r in rows]
    factors = [None] + [res[k] / res[k + 1] for k in range(len(res) - 1)]
    monotone = [None] + [bool(res[k + 1] < res[k]) for k in range(len(res) - 1)]
    w.csv(
        "ito_convergence.csv",
        ["dt", "n_paths", "rms_sup_residual", "rms_sup_residual_no_trace", "decrease_factor", "monotone",
         "martingale_mean", "martingale_se", "half_trace_mean"],
        [[r.dt, r.n_paths, r.rms_sup_residual, r.rms_sup_residual_no_trace, f, m, r.martingale_mean,
          r.martingale_se, r.half_trace_mean] for r, f, m in zip(rows, factors, monotone)],
    )
    finest = cfg.with_(dt=min(dts))
    led = dg.energy_ledger(simulate(finest, 0), finest)
    w.csv(
        "ledger_path0.csv",
        ["step", "t", "moreau", "drift_work", "half_trace", "martingale", "lhs", "rhs", "residual",
         "residual_without_trace"],
        [[k, led.times[k], led.moreau[k], led.drift_work[k], led.trace[k], led.martingale[k], led.lhs[k],
          led.rhs[k], led.residual[k], led.residual_without_trace[k]] for k in range(len(led.times))],
    )
    last = rows[-1]
    items = {
        "n_paths": last.n_paths,
        "residual_monotone": all(monotone[1:]),
        "min_decrease_factor": min(f for f in factors[1:]) if len(rows) > 1 else None,
        "finest_rms_sup_residual": last.rms_sup_residual,
        "finest_rms_sup_residual_no_trace": last.rms_sup_residual_no_trace,
        "control_ratio": last.rms_sup_residual_no_trace / last.rms_sup_residual,
        "martingale_within_3se": abs(last.martingale_mean) <= 3 * last.martingale_se,
    }
    w.summary(items)
    w.figure("ito.svg", np.array(dts), {"with trace": res, "trace removed": [r.rms_sup_residual_no_trace for r in rows]},
             "dt", "RMS sup residual", logx=True, logy=True, markers=True)
    echo(f"ito residual monotone: {items['residual_monotone']}; control ratio {items['control_ratio']:.3g}")
    return 0


def run_check_stability(rc: RunConfig, w: Writer, workers: int, echo):
    cfg = rc.sim
    u = cfg.u0
    scales = rc["diag.pair_scales"]
    rep = dg.stability_probe(cfg, [(u, s * u) for s in scales], workers=workers)
    w.csv("stability.csv", ["pair", "scale", "ratio"], [[k, s, r] for k, (s, r) in enumerate(zip(scales, rep.pair_ratios))])
    items = {"K_hat": rep.K_hat, "gronwall_K": rep.gronwall_K, "bounded": rep.K_hat <= rep.gronwall_K,
             "ratio_spread": rep.ratio_spread, "skipped_pairs": rep.skipped}
    items.update({f"const_{k}": float(v) for k, v in rep.constants.items()})
    w.summary(items)
    echo(f"K_hat={rep.K_hat:.4g} <= K={rep.gronwall_K:.4g}: {items['bounded']}")
    return 0


def run_prox_test(rc: RunConfig, w: Writer, workers: int, echo):
    cfg = rc.sim
    results = []
    graphs = dict(checks.default_graphs())
    graphs["configured"] = cfg.graph
    for label, g in graphs.items():
        results += checks.graph_suite(g, label, seed=rc["noise.seed"])
    for n in sorted({8, cfg.grid.n}):
        m = en.EnergyModel(en.Grid(n), cfg.energy.beta1, cfg.energy.beta0, cfg.energy.p)
        results += checks.energy_suite(m, f"energy_n{n}", seed=rc["noise.seed"])
    w.csv("checks.csv", ["suite", "check", "worst", "tol", "n", "passed"],
          [[r.suite, r.name, r.worst, r.tol, r.n, r.passed] for r in results])
    failed = [f"{r.suite}/{r.name}" for r in results if not r.passed]
    w.summary({"n_checks": len(results), "n_failed": len(failed), "all_passed": not failed,
               "failed": ";".join(failed)})
    echo(f"{len(results) - len(failed)}/{len(results)} property checks passed")
    return 1 if failed else 0


RUNNERS = {
    "simulate": run_simulate,
    "sweep-lambda": run_sweep_lambda,
    "check-ito": run_check_ito,
    "check-stability": run_check_stability,
    "prox-test": run_prox_test,
}

KNOWN_ERRORS = (ConfigError, dg.HypothesisError, SimulationError, en.NewtonError, mg.SolverError, ValueError)


def run(subcommand: str, rc: RunConfig, out, workers: int | None = None, echo=None) -> tuple[int, dict]:
    """Run one subcommand into ``out``; returns ``(exit status, manifest)``."""
    echo = echo or (lambda *_: None)
    started = time.time()
    workers = rc["sim.workers"] if workers is None else workers
    w = Writer(Path(out), rc["plot.enabled"])
    status = RUNNERS[subcommand](rc, w, workers, echo)
    return status, write_manifest(w, subcommand, rc, started)


# ------------------------------------------------------------------ click glue


def _load(config, seed, paths, workers) -> RunConfig:
    rc = parse_config(config) if config else parse_text("")
    over = {}
    if seed is not None:
        over["noise__seed"] = seed
    if paths is not None:
        over["sim__paths"] = paths
    if workers is not None:
        over["sim__workers"] = workers
    return rc.with_overrides(**over) if over else rc


def _common(f):
    f = click.option("--quiet", is_flag=True, help="Suppress progress output.")(f)
    f = click.option("--workers", type=int, default=None, help="Worker processes for path-level parallelism.")(f)
    f = click.option("--paths", type=int, default=None, help="Override sim.paths.")(f)
    f = click.option("--seed", type=int, default=None, help="Override noise.seed.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True)(f)
    f = click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="dnspde")
def main():
    """Simulate and verify Yosida-regularized doubly nonlinear stochastic evolutions."""


def _make_command(name):
    @_common
    def cmd(config, out, seed, paths, workers, quiet):
        echo = (lambda *_: None) if quiet else click.echo
        try:
            rc = _load(config, seed, paths, workers)
            status, _ = run(name, rc, out, echo=echo)
        except KNOWN_ERRORS as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc
        sys.exit(status)

    cmd.__doc__ = {
        "simulate": "Ensemble run: trajectories, path summaries, energy balance.",
        "sweep-lambda": "A priori quantities across lambda and the lambda-Cauchy sequence.",
        "check-ito": "Energy-ledger residual under dt refinement, with and without the trace term.",
        "check-stability": "Empirical continuous-dependence constant against the Gronwall bound.",
        "prox-test": "Randomized property suites for graphs and the energy.",
    }[name]
    return main.command(name)(cmd)


for _name in SUBCOMMANDS:
    _make_command(_name)


@main.command("verify")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--workers", type=int, default=None, help="Worker count for the re-run.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for the re-run outputs.")
def verify(manifest, workers, out):
    """Re-run a manifest's subcommand and compare every output digest."""
    data = json.loads(Path(manifest).read_text(encoding="utf-8"))
    rc = parse_text(data["config"])
    target = out or tempfile.mkdtemp(prefix="dnspde-verify-")
    try:
        _, new = run(data["subcommand"], rc, target, workers=workers)
    except KNOWN_ERRORS as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc
    old, cur = data["outputs"], new["outputs"]
    bad = sorted(k for k in set(old) | set(cur) if old.get(k) != cur.get(k))
    for k in bad:
        click.echo(f"mismatch {k}")
    click.echo(f"{len(old) - len(bad)}/{len(old)} digests reproduced in {target}")
    sys.exit(1 if bad else 0)


if __name__ == "__main__":  # pragma: no cover
    main()
