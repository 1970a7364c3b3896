from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from epibif.equilibrium import all_equilibria, infected_equilibria
from epibif.models import rhs
from epibif.odesim import (
    IntegrationError,
    IntegratorConfig,
    Trajectory,
    bistability_probe,
    default_t_end,
    detect_attractor,
    integrate,
    recurrence_metrics,
    simulate_and_classify,
)
from epibif.report import load_golden, scenario_params, table_params
from epibif.spectral import stability


def test_matches_reference_solver(t2_case1):
    ic = [5.0, 0.3]
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12, t_end=50.0, sample_dt=1.0)
    traj = integrate(t2_case1, ic, cfg)
    ref = solve_ivp(lambda t, x: rhs(t2_case1, x), (0, 50), ic, method="DOP853", rtol=1e-12, atol=1e-14, t_eval=traj.t)
    np.testing.assert_allclose(traj.x, ref.y.T, rtol=1e-7, atol=1e-9)


def test_sampling_grid_ends_at_t_end(t2_case1):
    traj = integrate(t2_case1, [5.0, 0.3], IntegratorConfig(t_end=10.05, sample_dt=0.1))
    assert traj.t[0] == 0.0 and traj.t[-1] == 10.05
    assert np.all(np.diff(traj.t) > 0)
    np.testing.assert_array_equal(traj.x[0], [5.0, 0.3])


def test_equilibrium_start_stays_put(t2_case1):
    xe = all_equilibria(t2_case1)[0].state
    traj = integrate(t2_case1, xe, IntegratorConfig(t_end=100.0))
    assert np.max(np.abs(traj.x - xe)) < 1e-12


def test_halving_tolerances_changes_terminal_state_little():
    p = table_params("T1", 1).replace(Lambda=9.78)
    cfg = IntegratorConfig(t_end=500.0)
    a = integrate(p, [46.8, 10.0], cfg).x[-1]
    b = integrate(p, [46.8, 10.0], IntegratorConfig(rtol=cfg.rtol / 2, atol=cfg.atol / 2, t_end=500.0)).x[-1]
    assert np.max(np.abs(a - b) / np.abs(b)) < 1e-4


def test_step_budget_raises(t2_case1):
    with pytest.raises(IntegrationError) as exc:
        integrate(t2_case1, [5.0, 0.3], IntegratorConfig(t_end=100.0, max_steps=5))
    assert exc.value.t > 0


def test_wrong_dimension_rejected(t2_case1):
    with pytest.raises(ValueError):
        integrate(t2_case1, [1.0, 2.0, 3.0])


def _synthetic(y, dt=0.1):
    t = np.arange(len(y)) * dt
    return Trajectory(t, np.column_stack([np.zeros_like(y), y]))


def test_recurrence_metrics_on_spike_train():
    t = np.arange(0, 1000, 0.1)
    y = sum(np.exp(-((t - c) ** 2) / 4) for c in range(50, 1000, 100))
    m = recurrence_metrics(_synthetic(y))
    assert m.episodes == 5
    assert m.quiescent_fraction > 0.8


def test_recurrence_metrics_on_flat_signal():
    episodes, q = recurrence_metrics(_synthetic(np.full(1000, 3.0)))
    assert (episodes, q) == (0, 1.0)


def test_sinusoid_is_a_limit_cycle_not_recurrence():
    t = np.arange(0, 1000, 0.1)
    v = detect_attractor(_synthetic(1 + 0.5 * np.sin(2 * np.pi * t / 40)))
    assert v.kind == "limit_cycle"
    assert v.period == pytest.approx(40, rel=1e-3)


def test_spike_train_is_recurrent():
    t = np.arange(0, 1000, 0.1)
    y = sum(np.exp(-((t - c) ** 2) / 4) for c in np.cumsum(np.full(9, 100.0)) + np.arange(9) ** 2)
    assert detect_attractor(_synthetic(y)).kind == "recurrent"


def test_threshold_order_checked():
    with pytest.raises(ValueError):
        recurrence_metrics(_synthetic(np.sin(np.arange(1000.0))), theta_hi=0.1, theta_lo=0.5)


def test_case1_bistability(t2_case1):
    res = bistability_probe(t2_case1, [[17.5, 0.001], [2.233, 0.873]])
    assert res.bistable is True
    assert [v.equilibrium_index for _, v in res.verdicts] == [0, 2]


def test_probe_workers_give_identical_verdicts(t2_case1):
    ics = [[17.5, 0.001], [2.233, 0.873]]
    cfg = IntegratorConfig(t_end=1000.0)
    assert bistability_probe(t2_case1, ics, cfg, workers=2) == bistability_probe(t2_case1, ics, cfg)


def test_case7_limit_cycle_positivity():
    p = table_params("T2", 7).replace(B=0.0699)
    cfg = IntegratorConfig()
    traj, v = simulate_and_classify(p, [2.5, 0.3], cfg)
    assert v.kind == "limit_cycle"
    assert traj.x.min() > -10 * cfg.atol


def test_decaying_focus_is_not_a_limit_cycle():
    p = table_params("T2", 3).replace(B=0.083)
    xe = infected_equilibria(p)[-1].state
    _, v = simulate_and_classify(p, xe * 1.01)
    assert v.kind != "limit_cycle"


RECURRENCE_REGION = [(2, 0.0572, 30000.0), (3, 0.07, 5000.0), (4, 0.06, 5000.0), (5, 0.06, 5000.0), (6, 0.06, 5000.0)]


def _near_and_far(args):
    case, B, t_end = args
    p = table_params("T2", case).replace(B=B)
    near = infected_equilibria(p)[-1].state * 1.01
    cfg = IntegratorConfig(t_end=t_end)
    return [simulate_and_classify(p, ic, cfg)[1].kind for ic in (near, [14.0, 0.1])]


def test_recurrence_from_near_and_far_initial_conditions():
    with ProcessPoolExecutor(max_workers=4) as ex:
        kinds = list(ex.map(_near_and_far, RECURRENCE_REGION))
    assert kinds == [["recurrent", "recurrent"]] * len(RECURRENCE_REGION)


def _scenario_invariants(sc):
    p = scenario_params(sc)
    t_end = sc.get("t_end", default_t_end(p.model))
    cfg = IntegratorConfig(t_end=t_end)
    half = IntegratorConfig(rtol=cfg.rtol / 2, atol=cfg.atol / 2, t_end=t_end)
    eqs = all_equilibria(p)
    out = []
    for ic in sc["ics"]:
        traj, v = simulate_and_classify(p, ic, cfg)
        x_half = integrate(p, ic, half).x[-1]
        change = np.max(np.abs(traj.x[-1] - x_half)) / np.max(np.abs(x_half))
        stable = stability(p, eqs[v.equilibrium_index].state).stable if v.kind == "equilibrium" else True
        out.append((float(traj.x.min()), float(change), stable))
    return out


def test_invariants_on_acceptance_runs():
    """Positivity, tolerance halving and agreement of equilibrium verdicts with linear stability."""
    with ProcessPoolExecutor(max_workers=4) as ex:
        results = [r for rs in ex.map(_scenario_invariants, load_golden()["dynamics"]) for r in rs]
    atol = IntegratorConfig().atol
    for lowest, change, stable in results:
        assert lowest > -10 * atol
        assert change < 1e-4
        assert stable


def test_case2_past_hopf_converges_to_upper_equilibrium():
    p = table_params("T2", 2).replace(B=0.06)
    _, v = simulate_and_classify(p, [2.4, 0.6])
    assert v.kind == "equilibrium"
    assert all_equilibria(p)[v.equilibrium_index].branch == "infected_upper"


def test_single_ic_is_not_bistable(t2_case1):
    assert bistability_probe(t2_case1, [[2.233, 0.873]], IntegratorConfig(t_end=500.0)).bistable is False


def test_case3_far_start_recurrence_metrics():
    p = table_params("T2", 3).replace(B=0.083)
    traj = integrate(p, [14.0, 0.1])
    episodes, quiet = recurrence_metrics(traj)
    assert episodes >= 3 and quiet >= 0.5
