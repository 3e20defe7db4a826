import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnspde import diagnostics as dg
from dnspde import energy as en
from dnspde import noise as nz
from dnspde.config import parse_text
from dnspde.stepper import ForcingModel, simulate
from tests.conftest import load
from tests.oracles import stiffness


def cfg_from(text="", **kw):
    sim = parse_text("sim.T = 0.05\nsim.paths = 4\n" + text).sim
    return sim.with_(**kw) if kw else sim


# -- energy ledger ---------------------------------------------------------------


def test_ledger_vanishes_at_rest():
    cfg = cfg_from("noise.kind = zero\nforcing.kind = zero\nsim.u0 = zero\n")
    led, sup = dg.ito_residual(simulate(cfg), cfg)
    assert sup == 0.0
    np.testing.assert_array_equal(led.moreau, 0.0)


def test_ledger_residual_first_order_without_noise():
    cfg = cfg_from("noise.kind = zero\nsim.u0_scale = 1.0\nsim.lambda = 0.5\n")
    dts = [4e-3, 2e-3, 1e-3]
    res = [dg.ito_residual(simulate(cfg.with_(dt=dt)), cfg.with_(dt=dt))[1] for dt in dts]
    assert res[0] / res[1] >= 1.8 and res[1] / res[2] >= 1.8


def test_ledger_terms_consistent():
    cfg = cfg_from()
    rec = simulate(cfg, 1)
    led = dg.energy_ledger(rec, cfg)
    m, lam = cfg.energy, cfg.lam
    for k in (0, len(rec.u) - 1):
        assert led.moreau[k] == pytest.approx(en.moreau_envelope(m, lam, rec.u[k]), rel=1e-10)
    assert led.drift_work[0] == led.trace[0] == led.martingale[0] == 0.0
    assert np.all(np.diff(led.trace) >= 0)


def test_ledger_recomputation_is_bitwise():
    cfg = cfg_from()
    a = dg.energy_ledger(simulate(cfg, 2), cfg)
    b = dg.energy_ledger(simulate(cfg, 2), cfg)
    for name in ("moreau", "drift_work", "trace", "martingale"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_martingale_term_is_centered():
    cfg = cfg_from()
    (row,) = dg.ito_convergence(cfg, [2e-3], n_paths=48)
    assert abs(row.martingale_mean) <= 3 * row.martingale_se
    assert row.half_trace_mean > 0
    assert row.rms_sup_residual < row.rms_sup_residual_no_trace


# -- a priori sweep ------------------------------------------------------------------


def test_power_growth_examples():
    lams = [0.5, 0.25, 0.125, 0.0625]
    assert dg.power_growth([l**-0.5 for l in lams], lams)
    assert not dg.power_growth([1.0] * 4, lams)
    assert not dg.power_growth([1 - l for l in lams], lams)
    assert not dg.power_growth([0.0, 1.0, 2.0, 3.0], lams)
    # order of the input does not matter
    assert dg.power_growth([l**-0.5 for l in lams[::-1]], lams[::-1])


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.1, 10.0))
def test_power_growth_threshold(gamma, scale):
    lams = np.array([0.5, 0.25, 0.125, 0.0625])
    flagged = dg.power_growth(scale * lams**-gamma, lams, gamma_min=0.15)
    if gamma >= 0.16:
        assert flagged
    if gamma <= 0.14:
        assert not flagged


def test_apriori_sweep_at_rest():
    cfg = cfg_from("noise.kind = zero\nforcing.kind = zero\nsim.u0 = zero\n")
    rep = dg.apriori_sweep(cfg, [0.5, 0.25], n_paths=1)
    assert rep.ok and all(r == 1.0 for r in rep.ratios.values())
    assert [r["dt"] for r in rep.rows] == pytest.approx([0.1 * 0.25, 0.1 * 0.0625])


def test_apriori_sweep_rejects_bad_lambda():
    with pytest.raises(ValueError):
        dg.apriori_sweep(cfg_from(), [0.5, 0.0])


def test_apriori_report_flags():
    rep = dg.AprioriReport([1, 0.5], [], {k: 1.0 for k in dg.APRIORI_FIELDS}, {k: False for k in dg.APRIORI_FIELDS}, 10)
    assert rep.ok
    rep.ratios["sup_energy"] = 11.0
    rep.growth["sup_V_norm_p"] = True
    assert rep.flagged == ["sup_energy", "sup_V_norm_p"]


# -- lambda convergence -------------------------------------------------------------------


def test_cauchy_identical_lambdas_give_zero():
    res = dg.lambda_cauchy(cfg_from(), [0.25, 0.25], dt=2e-3)
    assert res.errors.tolist() == [0.0]


def test_cauchy_shares_dt_and_noise():
    res = dg.lambda_cauchy(cfg_from(), [0.5, 0.25, 0.125])
    assert res.dt == pytest.approx(0.1 * 0.125**2)
    assert len(res.errors) == 2 and np.all(res.errors > 0)


def test_cauchy_slack_rule():
    r = dg.CauchyResult([1, 0.5, 0.25], 0.1, np.array([1.0, 1.05]), np.zeros(1), slack=0.1)
    assert r.nonincreasing
    r.errors = np.array([1.0, 1.2])
    assert not r.nonincreasing


def test_exact_linear_reference_converges():
    cfg = load("linear.cfg", noise__kind="zero", forcing__a0=0.0, grid__n=8, sim__T=0.1).sim
    errs, orders, dts = dg.exact_linear_errors(cfg, [0.25, 0.125, 0.0625])
    assert np.all(np.diff(errs) < 0)
    assert dts == pytest.approx([0.1 * l**2 for l in (0.25, 0.125, 0.0625)])
    assert orders[-1] > 0.5


@pytest.mark.parametrize(
    "text",
    [
        "",  # ppower energy
        "model.beta1 = quadratic\nmodel.p = 2\nforcing.a0 = 0\n",  # noise and sign graph remain
    ],
)
def test_exact_reference_refuses_nonlinear(text):
    with pytest.raises(dg.HypothesisError):
        dg.exact_linear_errors(cfg_from(text), [0.5, 0.25])


# -- continuous dependence -------------------------------------------------------------------


def test_gronwall_constants_affine_forcing():
    rc = load("linear.cfg", grid__n=8, noise__kind="zero")
    K, consts = dg.gronwall_constant(rc.sim)
    g = rc.sim.grid
    lap_min = np.linalg.eigvalsh(stiffness(8, g.h)).min()
    assert consts["L_F"] == pytest.approx(0.25 / lap_min, rel=1e-10)
    assert consts["L_G"] == 0.0
    assert consts["B_norm"] == 1.0 and consts["c_B"] == 1.0 and consts["c_A"] == 1.0
    assert K == pytest.approx(2 * np.exp(consts["kappa"] * rc.sim.T))


def test_stability_probe_skips_equal_data_and_respects_bound():
    rc = load("linear.cfg", grid__n=8, sim__T=0.05, sim__lambda=0.25)
    cfg = rc.sim
    u = cfg.u0
    rep = dg.stability_probe(cfg, [(u, u), (2 * u, u)], n_paths=3)
    assert rep.skipped == 1 and len(rep.pair_ratios) == 1
    assert 0 < rep.K_hat <= rep.gronwall_K


def test_stability_probe_linear_scaling():
    # the difference equation is linear, so scaled pairs give the same ratio
    rc = load("linear.cfg", grid__n=8, sim__T=0.05, sim__lambda=0.25)
    u = rc.sim.u0
    rep = dg.stability_probe(rc.sim, [(2 * u, u), (1.5 * u, u), (3 * u, u)], n_paths=2)
    assert rep.ratio_spread < 1e-6


@pytest.mark.parametrize(
    "override",
    [dict(model__beta1="ppower", model__p=4.0), dict(graph__kind="power", graph__q=3.0), dict(noise__phi="tanh")],
)
def test_stability_refuses_nonlinear(override):
    rc = load("linear.cfg", grid__n=8, **override)
    with pytest.raises(dg.HypothesisError):
        dg.gronwall_constant(rc.sim)


def test_stability_allows_additive_noise():
    rc = load("linear.cfg", grid__n=8, noise__kind="additive")
    _, consts = dg.gronwall_constant(rc.sim)
    assert consts["L_G"] == 0.0


# -- dissipation, deterministic reduction, truncation ---------------------------------------------


def test_dissipation_balance_holds():
    rep = dg.dissipation_report(cfg_from(), n_paths=6)
    assert rep.inequality_ok and rep.coercive_ok
    assert np.all(np.diff(rep.mean_dissipation) >= 0)


def test_deterministic_check_small_problem():
    cfg = cfg_from("noise.kind = zero\nforcing.kind = zero\nsim.u0_scale = 1.0\ngrid.n = 12\nsim.lambda = 0.5\n")
    rep = dg.deterministic_check(cfg, refine=4)
    assert rep.rel_error_T < 5e-2
    assert rep.nonincreasing
    assert len(rep.prox_energy) == cfg.n_steps + 1


def test_rk4_reference_needs_zero_noise():
    with pytest.raises(dg.HypothesisError):
        dg.rk4_reference(cfg_from())


def test_truncation_sensitivity_small():
    cfg = cfg_from("noise.m = 4\n")
    rel = dg.truncation_sensitivity(cfg)
    assert set(rel) == {"sup_norm_H", "terminal_norm_H_sq", "terminal_energy", "max_prox_energy", "dissipation"}
    assert max(rel.values()) < 0.05


def test_truncation_zero_noise_is_exactly_insensitive():
    cfg = cfg_from("noise.kind = additive\nnoise.sigma0 = 0\n")
    assert max(dg.truncation_sensitivity(cfg).values()) == 0.0


def test_ledger_starts_at_zero():
    cfg = cfg_from()
    led = dg.energy_ledger(simulate(cfg, 3), cfg)
    assert led.residual[0] == 0.0


def test_linear_ledger_first_order_under_quartering():
    rc = load("linear.cfg", grid__n=16, noise__kind="zero", sim__lambda=0.5, sim__T=0.1)
    cfg = rc.sim
    res = [dg.ito_residual(simulate(cfg.with_(dt=dt)), cfg.with_(dt=dt))[1] for dt in (4e-3, 1e-3, 2.5e-4)]
    assert res[0] / res[1] >= 1.8 and res[1] / res[2] >= 1.8


def test_apriori_energy_bounded_by_initial_without_noise():
    cfg = cfg_from("noise.kind = zero\nforcing.kind = zero\nsim.u0_scale = 1.0\n")
    rep = dg.apriori_sweep(cfg, [0.5, 0.25], n_paths=1)
    e0 = en.energy_value(cfg.energy, cfg.u0)
    assert all(r["sup_energy"] <= e0 for r in rep.rows)


def test_dissipation_report_without_noise_or_forcing():
    cfg = cfg_from("noise.kind = zero\nforcing.kind = zero\nsim.u0_scale = 1.0\n")
    rep = dg.dissipation_report(cfg, n_paths=1)
    assert np.all(np.diff(rep.mean_moreau) <= 1e-12)
    assert rep.inequality_ok and rep.coercive_ok


def test_cauchy_linear_zero_noise_decreases():
    cfg = load("linear.cfg", noise__kind="zero", forcing__a0=0.0, grid__n=8, sim__T=0.1).sim
    res = dg.lambda_cauchy(cfg, [0.25, 0.125, 0.0625, 0.03125])
    assert np.all(np.diff(res.errors) < 0)
    # the local order grows toward the asymptotic regime
    assert 0 < res.orders[0] < res.orders[1]
