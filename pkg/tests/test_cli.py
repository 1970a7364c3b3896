import subprocess
import sys

import pytest
import yaml

from epibif.cli import main
from epibif.report import parse_trajectory

INHOST = {"A": 0.71, "B": 0.0572, "C": 0.823, "D": 0.057}


def _config(tmp_path, **data):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def test_reproduce_t2_exits_zero(capsys):
    assert main(["reproduce", "--table", "T2"]) == 0
    out = capsys.readouterr().out
    assert out.count(": pass") == 8


def test_equilibria_summary(tmp_path, capsys):
    cfg = _config(tmp_path, model="INHOST_CONVEX", params={**INHOST, "A": 0.8, "B": 0.036}, command="equilibria")
    assert main(["equilibria", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "infected_upper" in out and "2.233533" in out


@pytest.mark.parametrize(
    "data,key",
    [
        ({"model": "INHOST_CONVEX", "params": {**INHOST, "BB": 0.1}, "command": "equilibria"}, "params.BB"),
        ({"model": "INHOST_CONVEX", "params": {**INHOST, "B": -0.1}, "command": "equilibria"}, "params.B"),
        ({"model": "INHOST", "params": INHOST, "command": "equilibria"}, "model"),
        ({"model": "INHOST_CONVEX", "params": INHOST, "command": "equilibria", "extra": 1}, "extra"),
        ({"model": "INHOST_CONVEX", "params": INHOST, "command": "simulate", "options": {"ic": [1.0]}}, "options.ic"),
        ({"model": "INHOST_CONVEX", "params": INHOST, "command": "hopf", "options": {"tol": 1}}, "options.tol"),
    ],
)
def test_invalid_config_exits_2_naming_key(tmp_path, capsys, data, key):
    cfg = _config(tmp_path, **data)
    assert main([data["command"], "--config", cfg]) == 2
    assert repr(key) in capsys.readouterr().err


def test_command_mismatch_exits_2(tmp_path):
    cfg = _config(tmp_path, model="INHOST_CONVEX", params=INHOST, command="hopf")
    assert main(["sweep", "--config", cfg]) == 2


def test_simulate_case2_is_recurrent(tmp_path, capsys):
    cfg = _config(
        tmp_path, model="INHOST_CONVEX", params=INHOST, command="simulate",
        options={"ic": [2.4, 0.5], "t_end": 12000, "output": "c2.csv"},
    )
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "verdict=recurrent" in capsys.readouterr().out
    t, x = parse_trajectory(tmp_path / "c2.csv")
    assert t[-1] == 12000.0 and x.shape[1] == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    cfg = _config(
        tmp_path, model="INHOST_CONVEX", params=INHOST, command="simulate",
        options={"ic": [2.4, 0.5], "max_steps": 3},
    )
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "step budget" in capsys.readouterr().err


def test_missing_output_directory_exits_3(tmp_path):
    cfg = _config(tmp_path, model="INHOST_CONVEX", params=INHOST, command="diagram")
    assert main(["diagram", "--config", cfg, "--out", str(tmp_path / "nope")]) == 3


def test_mismatch_exits_4(tmp_path, monkeypatch):
    import epibif.report as report

    golden = report.load_golden()
    golden["T2"]["cases"][0]["turning"][0] += 0.01
    monkeypatch.setattr(report, "load_golden", lambda: golden)
    assert main(["reproduce", "--table", "T2", "--case", "1"]) == 4


def test_diagram_and_hopf_commands(tmp_path, capsys):
    cfg = _config(
        tmp_path, model="INHOST_CONVEX", params={**INHOST, "A": 0.03}, command="diagram",
        options={"range": [0.01, 0.2], "samples": 21},
    )
    assert main(["diagram", "--config", cfg, "--out", str(tmp_path)]) == 0
    text = (tmp_path / "diagram.csv").read_text(encoding="utf-8")
    assert ",hopf\n" not in text and ",turning\n" in text
    cfg = _config(tmp_path, model="INHOST_CONVEX", params={**INHOST, "A": 0.07}, command="normalform")
    assert main(["normalform", "--config", cfg]) == 0
    assert "class=d supercritical" in capsys.readouterr().out


def test_classify_reports_bistability(tmp_path, capsys):
    cfg = _config(
        tmp_path, model="INHOST_CONVEX", params={**INHOST, "A": 0.8, "B": 0.036}, command="classify",
        options={"ics": [[17.5, 0.001], [2.233, 0.873]]},
    )
    assert main(["classify", "--config", cfg]) == 0
    assert "bistable=True" in capsys.readouterr().out


def test_console_entry_point_runs_as_module(tmp_path):
    out = tmp_path / "rep"
    out.mkdir()
    cmd = [sys.executable, "-m", "epibif.cli", "reproduce", "--table", "T4", "--out", str(out)]
    first = subprocess.run(cmd, capture_output=True, text=True)
    assert first.returncode == 0, first.stderr
    data = (out / "reproduce.csv").read_bytes()
    again = subprocess.run(cmd, capture_output=True, text=True)
    assert again.stdout == first.stdout
    assert (out / "reproduce.csv").read_bytes() == data
