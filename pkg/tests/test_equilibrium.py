import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epibif.equilibrium import (
    all_equilibria,
    branch_parameter,
    classify_bifurcation_shape,
    infected_equilibria,
    infected_quadratic,
    reproduction_number,
    transcritical_value,
    turning_point,
    uninfected_equilibrium,
)
from epibif.models import ModelId, make_params, rhs
from epibif.report import load_golden, table_params

from conftest import BASE, random_params

GOLDEN = load_golden()


def test_inhost_case1_roots_and_lifted_states(t2_case1):
    q = infected_quadratic(t2_case1)
    np.testing.assert_allclose(q.roots, [0.023689, 0.8726886], atol=1e-5)
    eqs = infected_equilibria(t2_case1)
    assert [e.branch for e in eqs] == ["infected_lower", "infected_upper"]
    np.testing.assert_allclose([e.state[0] for e in eqs], [17.1282566, 2.233533], atol=1e-4)
    assert all(e.feasible for e in eqs)


@pytest.mark.parametrize("model", list(ModelId))
def test_equilibrium_residuals_on_random_draws(model):
    rng = np.random.default_rng(3)
    for _ in range(1000):
        p = random_params(model, rng)
        for e in all_equilibria(p):
            r = np.max(np.abs(rhs(p, e.state)))
            assert r < 1e-9 * (1 + np.max(np.abs(e.state)))


@given(
    A=st.floats(0.01, 5.0), B=st.floats(0.001, 1.0), C=st.floats(0.05, 5.0), D=st.floats(0.005, 1.0)
)
@settings(max_examples=300, deadline=None)
def test_vieta_relations_for_inhost_roots(A, B, C, D):
    p = make_params("INHOST_CONVEX", A=A, B=B, C=C, D=D)
    q = infected_quadratic(p)
    if len(q.roots) == 2:
        s1, s2 = q.roots
        scale = abs(q.b / q.a) + abs(q.c / q.a) + 1e-300
        assert abs((s1 + s2) + q.b / q.a) <= 1e-10 * scale
        assert abs(s1 * s2 - q.c / q.a) <= 1e-10 * scale
        assert s1 <= s2


def test_uninfected_states_and_r0():
    p = make_params("SIR_TREATMENT", **BASE[ModelId.SIR_TREATMENT])
    e, r0 = uninfected_equilibrium(p)
    np.testing.assert_allclose(e.state, [p.Lambda / p.d, 0.0])
    assert e.branch == "uninfected"
    assert math.isclose(r0, reproduction_number(p))
    e, r0 = uninfected_equilibrium(table_params("T2", 1))
    assert r0 == pytest.approx(0.036 / 0.057)


def test_sir_concave_branch_is_linear():
    p = make_params("SIR_CONCAVE", **BASE[ModelId.SIR_CONCAVE])
    q = infected_quadratic(p)
    assert q.a == 0
    eqs = infected_equilibria(p)
    assert len(eqs) == 1 and eqs[0].branch == "infected_upper"
    assert not turning_point(p).exists
    assert classify_bifurcation_shape(p) == "forward"


@pytest.mark.parametrize("case", range(1, 9))
def test_inhost_turning_points(case):
    row = GOLDEN["T2"]["cases"][case - 1]
    tp = turning_point(table_params("T2", case))
    assert tp.exists
    assert tp.param_value == pytest.approx(row["turning"][0], abs=1e-3)
    assert tp.state[1] == pytest.approx(row["turning"][1], abs=1e-3)


def test_inhost_turning_point_is_double_root():
    p = table_params("T2", 5)
    tp = turning_point(p)
    q = infected_quadratic(p.replace(B=tp.param_value))
    assert abs(q.discriminant) <= 1e-10 * (q.b ** 2 + abs(4 * q.a * q.c))


@pytest.mark.parametrize("case", range(1, 6))
def test_treatment_turning_points(case):
    row = GOLDEN["T1"]["cases"][case - 1]
    tp = turning_point(table_params("T1", case))
    if row["turning"] is None:
        assert not tp.exists or tp.param_value <= 0
        return
    assert tp.param_value == pytest.approx(row["turning"][0], abs=1e-2)
    assert tp.state[1] == pytest.approx(row["turning"][1], abs=1e-2)


def test_autoimmune_fold_from_discriminant(auto3d):
    tp = turning_point(auto3d)
    assert tp.param_value == pytest.approx(879.9848, abs=1e-2)
    assert tp.state[0] == pytest.approx(-1.4205, abs=1e-2)
    # the fold is where the two infected roots merge
    near = auto3d.replace(lambda_E=tp.param_value * (1 + 1e-6))
    r = infected_quadratic(near).roots
    assert len(r) == 2 and abs(r[0] - r[1]) < 0.05


def test_transcritical_values(auto3d):
    assert transcritical_value(table_params("T1", 1)) == pytest.approx(9.87, abs=5e-3)
    assert transcritical_value(table_params("T2", 3)) == 0.057
    assert transcritical_value(auto3d) == pytest.approx(900.45, abs=0.01)


def test_zero_root_at_transcritical_point():
    p = table_params("T2", 1).replace(B=0.057)
    roots = infected_quadratic(p).roots
    assert min(abs(r) for r in roots) < 1e-14


def test_branch_parameter_inverts_the_quadratic():
    p = table_params("T2", 4)
    for s in (0.05, 0.3, 0.9):
        b = branch_parameter(p, s)
        q = infected_quadratic(p.replace(B=b))
        assert min(abs(r - s) for r in q.roots) < 1e-10


def test_bifurcation_shapes():
    assert classify_bifurcation_shape(table_params("T2", 5)) == "backward_positive"
    assert classify_bifurcation_shape(table_params("T2", 7)) == "backward_negative"
    assert classify_bifurcation_shape(table_params("T1", 5)) == "forward"
