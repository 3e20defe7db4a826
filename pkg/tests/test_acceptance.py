"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the terminal summary under "acceptance criteria".
"""

import json
import time

import numpy as np
import pytest

from dnspde import checks
from dnspde import diagnostics as dg
from dnspde import energy as en
from dnspde.cli import run
from dnspde.config import parse_text
from tests.conftest import load

pytestmark = pytest.mark.acceptance


def test_criterion_1_monotone_graph_suite(acceptance):
    start = time.perf_counter()
    results = []
    for label, g in checks.default_graphs().items():
        results += checks.graph_suite(g, label, n=1000, seed=0, tol=1e-10)
    elapsed = time.perf_counter() - start
    failed = [f"{r.suite}/{r.name}" for r in results if not r.passed]
    names = {r.name for r in results}
    ok = not failed and elapsed < 10 and {"nonexpansive", "yosida_lipschitz", "selection", "round_trip"} <= names
    ok &= min(r.n for r in results) >= 1000
    worst = max(r.worst for r in results if r.tol == 1e-10)
    acceptance(1, ok, f"{len(results)} checks on {len(checks.default_graphs())} graphs, worst {worst:.2e}, "
                      f"{elapsed:.1f}s, failed={failed}")
    assert ok


ENERGY_PRESETS = [("quadratic", "quadratic", 2.0), ("ppower", "quadratic", 4.0), ("ppower", "quartic", 4.0),
                  ("ppower", "zero", 3.0)]


def test_criterion_2_energy_suite(acceptance):
    start = time.perf_counter()
    results = []
    for n in (8, 32, 64):
        for b1, b0, p in ENERGY_PRESETS:
            results += checks.energy_suite(en.make_model(n, b1, b0, p), f"{b1}-{b0}-p{p:g}-n{n}", seed=n)
    elapsed = time.perf_counter() - start
    failed = [f"{r.suite}/{r.name}" for r in results if not r.passed]
    ok = not failed and elapsed < 30
    acceptance(2, ok, f"{len(results)} checks on N in (8, 32, 64), {elapsed:.1f}s, failed={failed}")
    assert ok


def test_criterion_3_ito_formula_detection(acceptance):
    rc = load("ito.cfg")
    cfg = rc.sim
    assert (cfg.grid.n, cfg.lam, cfg.noise.m, cfg.T, cfg.n_paths) == (32, 0.25, 8, 0.5, 200)
    rows = dg.ito_convergence(cfg, [4e-3, 1e-3, 2.5e-4])
    res = [r.rms_sup_residual for r in rows]
    factors = [res[0] / res[1], res[1] / res[2]]
    control = rows[-1].rms_sup_residual_no_trace / rows[-1].rms_sup_residual
    no_trace = [r.rms_sup_residual_no_trace for r in rows]
    ok = all(f >= 1.3 for f in factors) and control >= 5
    acceptance(3, ok, f"RMS sup residual {['%.3e' % x for x in res]}, factors {['%.2f' % f for f in factors]}; "
                      f"without trace {['%.3e' % x for x in no_trace]}, floor/residual {control:.1f}")
    assert ok


def test_criterion_4_apriori_bounds(acceptance):
    rc = parse_text("sim.paths = 8\n")
    cfg = rc.sim.with_(T=rc["diag.sweep_T"])
    rep = dg.apriori_sweep(cfg, [1 / 2, 1 / 4, 1 / 8, 1 / 16], ratio_bound=10, gamma_min=rc["diag.gamma_min"])
    dts_ok = all(r["dt"] == pytest.approx(0.1 * r["lambda"] ** 2) for r in rep.rows)
    finite = all(np.isfinite(r[k]) and r[k] >= 0 for r in rep.rows for k in dg.APRIORI_FIELDS)
    ok = rep.ok and dts_ok and finite
    ratios = {k: round(v, 3) for k, v in rep.ratios.items()}
    acceptance(4, ok, f"max/min ratios {ratios}, growth flags {rep.growth}")
    assert ok


def test_criterion_5_lambda_cauchy(acceptance):
    rc = parse_text("")
    cau = dg.lambda_cauchy(rc.sim, rc["diag.cauchy_lambdas"])
    lin = load("linear.cfg", noise__kind="zero", forcing__a0=0.0, grid__n=16, sim__T=0.25).sim
    errs, orders, _ = dg.exact_linear_errors(lin, [1 / 16, 1 / 32, 1 / 64, 1 / 128])
    ok = cau.nonincreasing and len(cau.errors) == 3 and orders[-1] >= 0.9
    acceptance(5, ok, f"e_k {['%.4f' % e for e in cau.errors]} nonincreasing={cau.nonincreasing}; "
                      f"linear exact orders {['%.3f' % o for o in orders]}")
    assert ok


def test_criterion_6_stability(acceptance):
    start = time.perf_counter()
    cfg = load("linear.cfg").sim
    u = cfg.u0
    rep = dg.stability_probe(cfg, [(u, 2 * u), (u, 1.5 * u)])
    elapsed = time.perf_counter() - start
    ok = np.isfinite(rep.K_hat) and rep.ratio_spread < 0.01 and rep.K_hat <= rep.gronwall_K and elapsed < 120
    acceptance(6, ok, f"K_hat={rep.K_hat:.4f}, Gronwall K={rep.gronwall_K:.4f}, spread={rep.ratio_spread:.2e}, "
                      f"{elapsed:.1f}s")
    assert ok


def test_criterion_7_deterministic_reduction(acceptance):
    start = time.perf_counter()
    rc = load("deterministic.cfg")
    rep = dg.deterministic_check(rc.sim, refine=10)
    forced = load("deterministic.cfg", forcing__kind="affine")
    rep_f = dg.deterministic_check(forced.sim, refine=10)
    elapsed = time.perf_counter() - start
    ok = rep.rel_error_T <= 1e-3 and rep_f.rel_error_T <= 1e-3 and rep.nonincreasing and elapsed < 30
    acceptance(7, ok, f"relative error at T {rep.rel_error_T:.2e} (F=0), {rep_f.rel_error_T:.2e} (affine F); "
                      f"energy nonincreasing={rep.nonincreasing}; {elapsed:.1f}s")
    assert ok


SMALL = "grid.n = 8\nsim.T = 0.02\nsim.lambda = 0.5\nsim.paths = 8\nnoise.m = 3\n" \
        "diag.lambdas = 0.5, 0.25\ndiag.cauchy_lambdas = 0.5, 0.25, 0.125\ndiag.sweep_T = 0.02\n" \
        "diag.dt_ladder = 4e-3, 2e-3\n"
SMALL_LINEAR = "grid.n = 8\nsim.T = 0.02\nsim.lambda = 0.25\nsim.paths = 8\nmodel.beta1 = quadratic\n" \
               "model.beta0 = zero\nmodel.p = 2\ngraph.kind = linear\nnoise.phi = identity\n"


def test_criterion_8_reproducibility(acceptance, tmp_path):
    mismatches = []
    for sub in ("simulate", "sweep-lambda", "check-ito", "check-stability", "prox-test"):
        rc = parse_text(SMALL_LINEAR if sub == "check-stability" else SMALL)
        digests = {}
        for w in (1, 4, 8):
            out = tmp_path / f"{sub}-w{w}"
            _, man = run(sub, rc, out, workers=w)
            digests[w] = man["outputs"]
        if not (digests[1] == digests[4] == digests[8]):
            mismatches.append(f"{sub}: workers")
        # re-run from the stored manifest alone
        stored = json.loads((tmp_path / f"{sub}-w1" / "manifest.json").read_text())
        _, again = run(stored["subcommand"], parse_text(stored["config"]), tmp_path / f"{sub}-again")
        if again["outputs"] != stored["outputs"]:
            mismatches.append(f"{sub}: manifest re-run")
    ok = not mismatches
    acceptance(8, ok, f"5 subcommands x workers (1, 4, 8) plus manifest re-run; mismatches={mismatches}")
    assert ok
