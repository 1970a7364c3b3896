import math

import numpy as np
import pytest

from epibif.equilibrium import infected_equilibria
from epibif.models import jacobian
from epibif.normal_form import (
    DegeneracyError,
    amplitude_estimate,
    canonical_frame,
    classify_hopf,
    hopf_data,
    lyapunov_a,
    simulation_probe,
    transversality_d,
    transversality_d_fd,
)
from epibif.odesim import IntegratorConfig, integrate
from epibif.report import load_golden, table_params
from epibif.scan import find_hopf

ROWS = load_golden()["T4"]["rows"]


def _hopf(p, value):
    hopfs = [b for b in find_hopf(p) if b.kind == "hopf"]
    return min(hopfs, key=lambda b: abs(b.param_value - value))


@pytest.mark.parametrize("row", ROWS, ids=lambda r: f"case{r['case']}-{r['hopf'][0]}")
def test_table4_row(row):
    p = table_params("T4", row["case"])
    h = hopf_data(p, _hopf(p, row["hopf"][0]))
    assert math.copysign(1, h.d) == math.copysign(1, row["d"])
    assert math.copysign(1, h.a) == math.copysign(1, row["a"])
    assert h.d == pytest.approx(row["d"], rel=0.02)
    assert h.a == pytest.approx(row["a"], rel=0.30)
    assert h.cycle_stability == row["stability"]
    assert h.hopf_class == row["class"]


@pytest.mark.parametrize("row", ROWS, ids=lambda r: f"case{r['case']}-{r['hopf'][0]}")
def test_analytic_d_agrees_with_finite_differences(row):
    p = table_params("T4", row["case"])
    b = _hopf(p, row["hopf"][0])
    d = transversality_d(p, b)
    assert transversality_d_fd(p, b) == pytest.approx(d, rel=1e-4)


def test_cubic_coefficient_is_step_insensitive():
    p = table_params("T4", 4)
    b = _hopf(p, 0.1015)
    assert lyapunov_a(p, b, step=1e-4) == pytest.approx(lyapunov_a(p, b, step=1e-3), rel=1e-6)


def test_canonical_frame_rotates_the_linearisation():
    p = table_params("T2", 3)
    b = _hopf(p, 0.0819)
    x, P, w = canonical_frame(p, b)
    M = np.linalg.inv(P) @ jacobian(p.replace(B=b.param_value), x) @ P
    np.testing.assert_allclose(M, [[0, -w], [w, 0]], atol=1e-10)


def test_class_table():
    assert classify_hopf(1.0, 1.0)[:2] == ("a", "subcritical")
    assert classify_hopf(1.0, -1.0)[:2] == ("b", "supercritical")
    assert classify_hopf(-1.0, 1.0)[:2] == ("c", "subcritical")
    assert classify_hopf(-1.0, -1.0)[:2] == ("d", "supercritical")
    with pytest.raises(DegeneracyError):
        classify_hopf(0.0, -1.0)


def test_amplitude_estimate_side():
    p = table_params("T4", 4)
    h = hopf_data(p, _hopf(p, 0.1015))
    assert amplitude_estimate(h, 0.001) is None
    assert amplitude_estimate(h, -0.001) == pytest.approx(math.sqrt(-h.d * -0.001 / h.a))


@pytest.mark.parametrize("mu", [-0.0005, -0.001, -0.002])
def test_amplitude_law_at_supercritical_point(mu):
    """Mean canonical radius of the simulated cycle against sqrt(-d mu / a)."""
    p = table_params("T4", 4)
    b = _hopf(p, 0.1015)
    h = hopf_data(p, b)
    x_h, P, _ = canonical_frame(p, b)
    Pinv = np.linalg.inv(P)
    q = p.replace(B=b.param_value + mu)
    xe = min(infected_equilibria(q), key=lambda e: abs(e.state[1] - x_h[1])).state
    r_pred = amplitude_estimate(h, mu)
    t_end = 10 / abs(h.d * mu)
    traj = integrate(q, xe + P @ np.array([0.5 * r_pred, 0.0]), IntegratorConfig(t_end=t_end, sample_dt=0.5))
    tail = traj.x[traj.t > 0.8 * t_end] - xe
    r = np.linalg.norm(tail @ Pinv.T, axis=1).mean()
    assert r == pytest.approx(r_pred, rel=0.15)


def test_probe_finds_subcritical_case1():
    p = table_params("T4", 1)
    res = simulation_probe(p, _hopf(p, 0.0355))
    assert res.criticality == "subcritical"


def test_probe_finds_supercritical_autoimmune_hopf(auto3d):
    b = [b for b in find_hopf(auto3d) if b.kind == "hopf"][0]
    res = simulation_probe(auto3d, b)
    assert res.criticality == "supercritical"
    assert 0.35 <= res.exponent <= 0.75
    assert res.stable_side_decays
