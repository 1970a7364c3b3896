import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from epibif.odesim import IntegratorConfig, Trajectory, integrate, recurrence_metrics
from epibif.report import (
    diagram_rows,
    emit_diagram,
    emit_report,
    emit_trajectory,
    load_golden,
    parse_diagram,
    parse_trajectory,
    reproduce,
    scenario_params,
    table_params,
)
from epibif.scan import sweep_branch


def test_diagram_round_trip_is_bitwise(tmp_path):
    p = table_params("T2", 5)
    d = sweep_branch(p, 0.03, 0.12, samples=57)
    path = tmp_path / "d.csv"
    rows = emit_diagram(d, path, p)
    assert parse_diagram(path) == rows == diagram_rows(d, p)
    kinds = [r.bifurcation_kind for r in rows if r.bifurcation_kind]
    assert kinds.count("hopf") == 2 and "turning" in kinds


def test_diagram_file_format(tmp_path):
    p = table_params("AUTO", 1)
    d = sweep_branch(p, 1000.0, 1000.0)
    path = tmp_path / "d.csv"
    emit_diagram(d, path, p)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "param,branch,state_1,state_2,state_3,stability,bifurcation_kind"
    assert len(lines) == 1 + len(d.samples)


def test_empty_diagram_rejected(tmp_path):
    d = sweep_branch(table_params("T2", 1), 0.04, 0.04, points=False)
    d.samples.clear()
    with pytest.raises(ValueError):
        emit_diagram(d, tmp_path / "d.csv")


@given(arrays(np.float64, (7, 3), elements=st.floats(allow_nan=False, allow_infinity=False)))
@settings(max_examples=200, deadline=None)
def test_trajectory_round_trip_is_bitwise(tmp_path_factory, x):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    t = np.cumsum(np.full(7, 0.1))
    emit_trajectory(Trajectory(t, x[:, 1:]), path)
    t2, x2 = parse_trajectory(path)
    assert t2.tobytes() == t.tobytes()
    assert x2.tobytes() == np.ascontiguousarray(x[:, 1:]).tobytes()


def test_downsampling_keeps_first_and_last(tmp_path):
    t = np.linspace(0, 1, 103)
    traj = Trajectory(t, np.column_stack([t, t * t]))
    n = emit_trajectory(traj, tmp_path / "t.csv", every=10)
    t2, _ = parse_trajectory(tmp_path / "t.csv")
    assert n == len(t2) == 12
    assert t2[0] == t[0] and t2[-1] == t[-1]


def test_constant_trajectory_rows_identical(tmp_path):
    traj = Trajectory(np.arange(5.0), np.tile([1.5, 2.5], (5, 1)))
    emit_trajectory(traj, tmp_path / "c.csv")
    _, x = parse_trajectory(tmp_path / "c.csv")
    assert np.all(x == x[0])


def test_unwritable_path_raises(tmp_path):
    traj = Trajectory(np.arange(3.0), np.ones((3, 2)))
    with pytest.raises(OSError):
        emit_trajectory(traj, tmp_path / "missing" / "t.csv")


def test_autoimmune_run_csv_shows_recurrence(tmp_path):
    sc = next(s for s in load_golden()["dynamics"] if s["id"] == "AUTO")
    p = scenario_params(sc)
    traj = integrate(p, sc["ics"][0], IntegratorConfig(t_end=sc["t_end"]))
    emit_trajectory(traj, tmp_path / "a.csv")
    t, x = parse_trajectory(tmp_path / "a.csv")
    assert recurrence_metrics(Trajectory(t, x), component=0).episodes >= 3


@pytest.mark.parametrize("table,rows", [("T1", 5), ("T2", 8), ("T4", 10), ("AUTO", 1)])
def test_tables_reproduce(table, rows):
    rep = reproduce(table)
    assert len(rep.rows) == rows
    assert rep.passed, rep.failures()


def test_single_case_and_unknown_case():
    assert [r.case for r in reproduce("T2", case=3).rows] == ["3"]
    with pytest.raises(KeyError):
        reproduce("T2", case=9)


def test_report_csv_is_deterministic(tmp_path):
    emit_report(reproduce("T4"), tmp_path / "a.csv")
    emit_report(reproduce("T4"), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
