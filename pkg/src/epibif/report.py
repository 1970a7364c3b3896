"""
Table reproduction against shipped golden data, and CSV emission.

Golden values live in ``data/golden.json`` with per-cell tolerances. A
``TableReport`` holds one ``Row`` per case, each a list of ``Cell`` objects;
a row passes when every cell is within its tolerance.

CSV files are UTF-8 with LF line endings and 17 significant digits, written
to a temporary file in the target directory and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Sequence

import numpy as np

from .equilibrium import all_equilibria, turning_point
from .models import ParameterSet, make_params
from .normal_form import hopf_data
from .odesim import IntegratorConfig, Trajectory, bistability_probe, default_t_end
from .scan import BranchDiagram, _point_stability, find_hopf, find_transcritical
from .spectral import h_negative_intervals

__all__ = [
    "Cell",
    "Row",
    "TableReport",
    "DiagramRow",
    "load_golden",
    "table_params",
    "reproduce",
    "run_scenario",
    "scenario_params",
    "emit_diagram",
    "emit_trajectory",
    "emit_report",
    "diagram_rows",
    "parse_diagram",
    "parse_trajectory",
    "atomic_write_text",
    "fmt",
]

TABLES = ("T1", "T2", "T4", "AUTO")


@lru_cache(maxsize=1)
def _golden_text() -> str:
    return resources.files("epibif").joinpath("data/golden.json").read_text(encoding="utf-8")


def load_golden() -> dict:
    """Fresh copy of the golden table data."""
    return json.loads(_golden_text())


# --- report data ------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    name: str
    expected: Any
    computed: Any
    tol: float | None  # None: exact match
    relative: bool = False
    passed: bool = False


@dataclass
class Row:
    case: str
    cells: list[Cell] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)

    def add(self, cell: Cell) -> None:
        self.cells.append(cell)


@dataclass
class TableReport:
    table: str
    rows: list[Row] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[tuple[str, Cell]]:
        return [(r.case, c) for r in self.rows for c in r.cells if not c.passed]

    def summary(self) -> str:
        n_ok = sum(r.passed for r in self.rows)
        status = "PASS" if self.passed else "FAIL"
        return f"{self.table}: {n_ok}/{len(self.rows)} rows pass [{status}]"


def _num(name: str, expected, computed, tol: float, relative: bool = False) -> Cell:
    """Numeric cell. ``None`` expected means +inf (open interval end) or absence."""
    if expected is None:
        ok = computed is None or (isinstance(computed, float) and math.isinf(computed) and computed > 0)
        return Cell(name, None, computed, tol, relative, ok)
    if computed is None or not math.isfinite(computed):
        return Cell(name, expected, computed, tol, relative, False)
    err = abs(computed - expected)
    bound = tol * abs(expected) if relative else tol
    return Cell(name, expected, float(computed), tol, relative, bool(err <= bound * (1 + 1e-12)))


def _exact(name: str, expected, computed) -> Cell:
    return Cell(name, expected, computed, None, False, expected == computed)


# --- parameter sets ---------------------------------------------------------------


def table_params(table: str, case: int, golden: dict | None = None) -> ParameterSet:
    """Parameter set of a table case at the table's reference parameter value."""
    g = golden or load_golden()
    if table == "AUTO":
        return make_params(g["AUTO"]["model"], **g["AUTO"]["params"])
    if table not in ("T1", "T2", "T4"):
        raise KeyError(f"unknown table {table!r}")
    src = "T2" if table == "T4" else table
    tab = g[src]
    row = _case_row(tab["cases"], case, src)
    if src == "T1":
        return make_params(tab["model"], Lambda=tab["reference_Lambda"], k=row["k"], **tab["fixed"])
    return make_params(tab["model"], A=row["A"], B=tab["reference_B"], **tab["fixed"])


def _case_row(rows: list[dict], case: int, table: str) -> dict:
    for r in rows:
        if r["case"] == case:
            return r
    raise KeyError(f"{table} has no case {case}")


# --- dynamics scenarios -----------------------------------------------------------


def scenario_params(sc: dict, golden: dict | None = None) -> ParameterSet:
    """Parameter set for a dynamics scenario, resolving symbolic parameter values."""
    g = golden or load_golden()
    p = table_params(sc["table"], sc["case"], g)
    name = p.model.bifurcation_parameter
    value = sc["param"]
    if value == "hopf_midpoint":
        hs = [b.param_value for b in find_hopf(p) if b.kind == "hopf"]
        if len(hs) != 2:
            raise ValueError(f"scenario {sc['id']} needs two Hopf points, found {len(hs)}")
        value = 0.5 * (hs[0] + hs[1])
    elif value == "hopf_plus_1000":
        hs = [b.param_value for b in find_hopf(p) if b.kind == "hopf"]
        if not hs:
            raise ValueError(f"scenario {sc['id']} needs a Hopf point")
        value = hs[0] + 1000.0
    return p.replace(**{name: float(value)})


def _verdict_label(p: ParameterSet, v) -> str:
    if v.kind == "equilibrium":
        return f"equilibrium:{all_equilibria(p)[v.equilibrium_index].branch}"
    return v.kind


def run_scenario(
    sc: dict, cfg: IntegratorConfig | None = None, workers: int = 1, golden: dict | None = None
) -> tuple[list[str], bool | None]:
    """Simulate every ic of a scenario; returns (labels, bistable)."""
    p = scenario_params(sc, golden)
    cfg = cfg or IntegratorConfig()
    if cfg.t_end is None:
        t_end = sc.get("t_end", default_t_end(p.model))
        cfg = IntegratorConfig(cfg.rtol, cfg.atol, cfg.max_step, t_end, cfg.sample_dt, cfg.max_steps)
    res = bistability_probe(p, sc["ics"], cfg, workers=workers)
    return [_verdict_label(p, v) for _, v in res.verdicts], res.bistable


def _dynamics_cells(row: Row, table: str, case: int, g: dict, workers: int) -> None:
    for sc in g["dynamics"]:
        if sc["table"] != table or sc["case"] != case:
            continue
        labels, bistable = run_scenario(sc, workers=workers, golden=g)
        row.add(_exact(f"dynamics[{sc['id']}]", sc["expect"], labels))
        if sc.get("bistable"):
            row.add(_exact(f"bistable[{sc['id']}]", True, bistable))


# --- table reproduction -----------------------------------------------------------


def _cases(rows: list[dict], case: int | None, table: str) -> list[dict]:
    if case is None:
        return rows
    out = [r for r in rows if r["case"] == case]
    if not out:
        raise KeyError(f"{table} has no case {case}")
    return out


def _reproduce_t1(g: dict, case: int | None, strict: bool, workers: int) -> TableReport:
    tab = g["T1"]
    tol = tab["tolerances"]
    rep = TableReport("T1")
    for r in _cases(tab["cases"], case, "T1"):
        p = table_params("T1", r["case"], g)
        row = Row(str(r["case"]))
        tr = find_transcritical(p)
        ts = tab["transcritical"]
        row.add(_num("Lambda_S", ts["value"][0], tr.param_value, ts["tol"]))
        row.add(_num("I_S", ts["value"][1], float(tr.state[1]), ts["tol"]))
        tp = turning_point(p)
        if r["turning"] is None:
            row.add(_exact("turning_exists", False, bool(tp.exists and tp.param_value > 0)))
        else:
            row.add(_num("Lambda_T", r["turning"][0], tp.param_value if tp.exists else None, tol["turning"]))
            row.add(_num("I_T", r["turning"][1], float(tp.state[1]) if tp.exists else None, tol["turning"]))
        iv = h_negative_intervals(p)
        first = iv[0] if iv else (None, None)
        row.add(_num("h1_lo", r["h1"][0], first[0], tol["h1"]))
        row.add(_num("h1_hi", r["h1"][1], first[1], tol["h1"]))
        hopfs = [b for b in find_hopf(p, feasible_only=False) if b.kind == "hopf"]
        row.add(_exact("hopf_count", len(r["hopf"]), len(hopfs)))
        for j, (ev, es) in enumerate(r["hopf"]):
            b = min(hopfs, key=lambda b: abs(b.param_value - ev), default=None)
            row.add(_num(f"hopf{j}_Lambda", ev, b.param_value if b else None, tol["hopf"]))
            row.add(_num(f"hopf{j}_I", es, float(b.state[1]) if b else None, tol["hopf"]))
        row.add(_exact("feasible_hopf", r["feasible_hopf"], sum(b.feasible for b in hopfs)))
        if strict:
            _dynamics_cells(row, "T1", r["case"], g, workers)
        rep.rows.append(row)
    return rep


def _reproduce_t2(g: dict, case: int | None, strict: bool, workers: int) -> TableReport:
    tab = g["T2"]
    tol = tab["tolerances"]
    rep = TableReport("T2")
    for r in _cases(tab["cases"], case, "T2"):
        p = table_params("T2", r["case"], g)
        row = Row(str(r["case"]))
        tr = find_transcritical(p)
        ts = tab["transcritical"]
        row.add(_num("B_S", ts["value"][0], tr.param_value, ts["tol"]))
        row.add(_num("Y_S", ts["value"][1], float(tr.state[1]), ts["tol"]))
        tp = turning_point(p)
        row.add(_num("B_T", r["turning"][0], tp.param_value if tp.exists else None, tol["turning"]))
        row.add(_num("Y_T", r["turning"][1], float(tp.state[1]) if tp.exists else None, tol["turning"]))
        iv = h_negative_intervals(p)
        first = iv[0] if iv else (None, None)
        row.add(_num("h2_lo", r["h2"][0], first[0], tol["h2"]))
        row.add(_num("h2_hi", r["h2"][1], first[1], tol["h2"]))
        pts = find_hopf(p)
        row.add(_exact("point_count", len(r["points"]), len(pts)))
        for j, (ev, es, kind) in enumerate(r["points"]):
            b = min(pts, key=lambda b: abs(b.param_value - ev), default=None)
            row.add(_num(f"point{j}_B", ev, b.param_value if b else None, tol["point_param"]))
            row.add(_num(f"point{j}_Y", es, float(b.state[1]) if b else None, tol["point_state"]))
            row.add(_exact(f"point{j}_kind", kind, b.kind if b else None))
        if strict:
            _dynamics_cells(row, "T2", r["case"], g, workers)
        rep.rows.append(row)
    return rep


def _reproduce_t4(g: dict, case: int | None) -> TableReport:
    tab = g["T4"]
    tol = tab["tolerances"]
    rep = TableReport("T4")
    for r in _cases(tab["rows"], case, "T4"):
        p = table_params("T4", r["case"], g)
        row = Row(f"{r['case']}@{r['hopf'][0]}")
        hopfs = [b for b in find_hopf(p) if b.kind == "hopf"]
        b = min(hopfs, key=lambda b: abs(b.param_value - r["hopf"][0]), default=None)
        if b is None:
            row.add(_exact("hopf_found", True, False))
            rep.rows.append(row)
            continue
        row.add(_num("B_H", r["hopf"][0], b.param_value, tol["param"]))
        row.add(_num("Y_H", r["hopf"][1], float(b.state[1]), tol["state"]))
        h = hopf_data(p, b)
        row.add(_exact("sign_d", math.copysign(1, r["d"]), math.copysign(1, h.d)))
        row.add(_exact("sign_a", math.copysign(1, r["a"]), math.copysign(1, h.a)))
        row.add(_num("d", r["d"], h.d, tol["d_rel"], relative=True))
        row.add(_num("a", r["a"], h.a, tol["a_rel"], relative=True))
        row.add(_exact("stability", r["stability"], h.cycle_stability))
        row.add(_exact("class", r["class"], h.hopf_class))
        rep.rows.append(row)
    return rep


def _reproduce_auto(g: dict, strict: bool, workers: int) -> TableReport:
    tab = g["AUTO"]
    p = table_params("AUTO", 1, g)
    rep = TableReport("AUTO")
    row = Row("1")
    tr = find_transcritical(p)
    row.add(_num("lambda_ES", tab["transcritical"]["value"], tr.param_value, tab["transcritical"]["tol"]))
    tp = turning_point(p)
    tv, tt = tab["turning"]["value"], tab["turning"]["tol"]
    row.add(_num("lambda_ET", tv[0], tp.param_value if tp.exists else None, tt))
    row.add(_num("A_T", tv[1], float(tp.state[0]) if tp.exists else None, tt))
    hopfs = [b for b in find_hopf(p) if b.kind == "hopf"]
    hv, hr = tab["hopf"]["value"], tab["hopf"]["rtol"]
    b = hopfs[0] if hopfs else None
    row.add(_num("lambda_EH", hv[0], b.param_value if b else None, hr, relative=True))
    row.add(_num("A_H", hv[1], float(b.state[0]) if b else None, hr, relative=True))
    if strict:
        _dynamics_cells(row, "AUTO", 1, g, workers)
    rep.rows.append(row)
    return rep


def reproduce(table: str, case: int | None = None, strict: bool = False, workers: int = 1) -> TableReport:
    """Recompute a table from scratch and compare with the golden values.

    ``strict`` adds the simulated dynamics verdicts of the table's cases.
    """
    g = load_golden()
    if table == "T1":
        return _reproduce_t1(g, case, strict, workers)
    if table == "T2":
        return _reproduce_t2(g, case, strict, workers)
    if table == "T4":
        return _reproduce_t4(g, case)
    if table == "AUTO":
        return _reproduce_auto(g, strict, workers)
    raise KeyError(f"unknown table {table!r}; expected one of {TABLES}")


# --- CSV emission -----------------------------------------------------------------


def fmt(x: float) -> str:
    """17 significant digits; round-trips every finite double."""
    return format(float(x), ".17g")


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write UTF-8 text with LF endings via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


@dataclass(frozen=True)
class DiagramRow:
    param: float
    branch: str
    state: tuple[float, ...]
    stability: str
    bifurcation_kind: str


def diagram_rows(diagram: BranchDiagram, p: ParameterSet | None = None) -> list[DiagramRow]:
    """Rows in file order: samples and bifurcation points merged by parameter value.

    Bifurcation points need ``p`` (any parameter set of the swept family) to
    evaluate their stability; without it their stability column is empty.
    """
    rows = [
        DiagramRow(s.param, s.equilibrium.branch, tuple(float(v) for v in s.equilibrium.state), s.stability.kind, "")
        for s in diagram.samples
    ]
    for b in diagram.points:
        stab = _point_stability(p, b).kind if p is not None else ""
        rows.append(DiagramRow(b.param_value, b.branch or b.kind, tuple(float(v) for v in b.state), stab, b.kind))
    rows.sort(key=lambda r: r.param)
    return rows


def _diagram_header(n: int) -> list[str]:
    return ["param", "branch", *[f"state_{i + 1}" for i in range(n)], "stability", "bifurcation_kind"]


def emit_diagram(diagram: BranchDiagram, path, p: ParameterSet | None = None) -> list[DiagramRow]:
    rows = diagram_rows(diagram, p)
    if not rows:
        raise ValueError("cannot emit an empty diagram")
    body = [[fmt(r.param), r.branch, *map(fmt, r.state), r.stability, r.bifurcation_kind] for r in rows]
    atomic_write_text(path, _csv_text(_diagram_header(diagram.dimension), body))
    return rows


def parse_diagram(path) -> list[DiagramRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = len(header) - 4
        if header != _diagram_header(n):
            raise ValueError(f"unexpected diagram header {header}")
        return [
            DiagramRow(float(r[0]), r[1], tuple(float(v) for v in r[2 : 2 + n]), r[2 + n], r[3 + n])
            for r in reader
        ]


def _downsample_index(n: int, every: int) -> np.ndarray:
    if every < 1:
        raise ValueError("downsample factor must be >= 1")
    idx = np.arange(0, n, every)
    if n and idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def emit_trajectory(traj: Trajectory, path, every: int = 1) -> int:
    """Write ``t, state_1..state_n``; keeps every ``every``-th sample plus the last one."""
    idx = _downsample_index(len(traj.t), every)
    n = traj.x.shape[1]
    header = ["t", *[f"state_{i + 1}" for i in range(n)]]
    body = [[fmt(traj.t[i]), *map(fmt, traj.x[i])] for i in idx]
    atomic_write_text(path, _csv_text(header, body))
    return len(idx)


def parse_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "t":
            raise ValueError(f"unexpected trajectory header {header}")
        data = np.array([[float(v) for v in r] for r in reader], dtype=float).reshape(-1, len(header))
    return data[:, 0], data[:, 1:]


def _cell_text(v) -> str:
    if isinstance(v, float):
        return fmt(v)
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(_cell_text(x) for x in v)
    return str(v)


def emit_report(report: TableReport, path) -> None:
    header = ["table", "case", "cell", "expected", "computed", "tolerance", "relative", "pass"]
    body = [
        [report.table, r.case, c.name, _cell_text(c.expected), _cell_text(c.computed),
         _cell_text(c.tol), str(c.relative).lower(), str(c.passed).lower()]
        for r in report.rows
        for c in r.cells
    ]
    atomic_write_text(path, _csv_text(header, body))
