"""
Command-line entry point.

    epibif <command> --config <path> [--out <dir>] [--table T1|T2|T4|AUTO] [--case N] [--strict]

The config is a YAML file with top-level keys ``model``, ``params``,
``command`` and ``options``. Exit status: 0 success, 2 invalid config,
3 numerical or I/O failure, 4 reproduce mismatch.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import yaml

from .equilibrium import all_equilibria, reproduction_number, turning_point
from .models import PARAM_CLASSES, ModelId, ParameterError, ParameterSet, make_params
from .normal_form import hopf_data, simulation_probe
from .odesim import IntegratorConfig, bistability_probe, default_t_end, simulate_and_classify
from .report import TABLES, emit_diagram, emit_report, emit_trajectory, reproduce
from .scan import find_hopf, find_transcritical, sweep_branch
from .spectral import stability

COMMANDS = ("equilibria", "sweep", "hopf", "normalform", "simulate", "classify", "reproduce", "diagram")
TOP_KEYS = ("model", "params", "command", "options")

_INTEGRATOR_KEYS = {"t_end", "rtol", "atol", "max_step", "sample_dt", "max_steps"}
OPTION_KEYS = {
    "equilibria": set(),
    "sweep": {"range", "samples", "spacing", "feasible_only", "output"},
    "diagram": {"range", "samples", "spacing", "feasible_only", "output"},
    "hopf": {"feasible_only", "s_max", "n"},
    "normalform": {"feasible_only", "step", "probe"},
    "simulate": {"ic", "downsample", "output"} | _INTEGRATOR_KEYS,
    "classify": {"ics", "workers"} | _INTEGRATOR_KEYS,
    "reproduce": {"table", "case", "strict", "workers", "output"},
}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_MISMATCH = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key {key!r}: {message}")


@dataclass
class RunConfig:
    command: str
    model: ModelId | None = None
    params: ParameterSet | None = None
    options: dict = field(default_factory=dict)


def _number(key: str, v, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(key, f"expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(key, f"must be positive, got {v!r}")
    return float(v)


def _vector(key: str, v, dim: int) -> list[float]:
    if not isinstance(v, (list, tuple)) or len(v) != dim:
        raise ConfigError(key, f"expected a list of {dim} numbers, got {v!r}")
    return [_number(key, x) for x in v]


def _validate_options(command: str, opts: dict, model: ModelId | None) -> dict:
    allowed = OPTION_KEYS[command]
    for k in opts:
        if k not in allowed:
            raise ConfigError(f"options.{k}", f"not an option of {command}; allowed: {sorted(allowed)}")
    out = dict(opts)
    for k in ("t_end", "rtol", "atol", "max_step", "sample_dt", "s_max", "step"):
        if k in out:
            out[k] = _number(f"options.{k}", out[k], positive=True)
    for k in ("samples", "n", "max_steps", "downsample", "workers", "case"):
        if k in out and (isinstance(out[k], bool) or not isinstance(out[k], int) or out[k] < 1):
            raise ConfigError(f"options.{k}", f"expected a positive integer, got {out[k]!r}")
    for k in ("feasible_only", "probe", "strict"):
        if k in out and not isinstance(out[k], bool):
            raise ConfigError(f"options.{k}", f"expected true or false, got {out[k]!r}")
    if "range" in out:
        lo, hi = _vector("options.range", out["range"], 2)
        if lo <= 0 or hi <= 0:
            raise ConfigError("options.range", "bounds must be positive")
        out["range"] = (lo, hi)
    if "spacing" in out and out["spacing"] not in ("linear", "geometric"):
        raise ConfigError("options.spacing", f"expected linear or geometric, got {out['spacing']!r}")
    if "table" in out and out["table"] not in TABLES:
        raise ConfigError("options.table", f"expected one of {TABLES}, got {out['table']!r}")
    if "output" in out and not isinstance(out["output"], str):
        raise ConfigError("options.output", "expected a file name")
    dim = model.dimension if model else None
    if "ic" in out:
        out["ic"] = _vector("options.ic", out["ic"], dim)
    if "ics" in out:
        if not isinstance(out["ics"], list) or not out["ics"]:
            raise ConfigError("options.ics", "expected a non-empty list of initial conditions")
        out["ics"] = [_vector("options.ics", ic, dim) for ic in out["ics"]]
    return out


def parse_config(data, command: str | None = None) -> RunConfig:
    """Validate a loaded config mapping; ``command`` is the one given on the command line."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping with keys " + ", ".join(TOP_KEYS))
    for k in data:
        if k not in TOP_KEYS:
            raise ConfigError(str(k), f"unknown top-level key; allowed: {list(TOP_KEYS)}")
    cfg_cmd = data.get("command", command)
    if cfg_cmd not in COMMANDS:
        raise ConfigError("command", f"expected one of {COMMANDS}, got {cfg_cmd!r}")
    if command is not None and cfg_cmd != command:
        raise ConfigError("command", f"config says {cfg_cmd!r} but {command!r} was requested")
    opts = data.get("options") or {}
    if not isinstance(opts, dict):
        raise ConfigError("options", "expected a mapping")

    model = params = None
    if "model" in data or cfg_cmd != "reproduce":
        if "model" not in data:
            raise ConfigError("model", "missing")
        try:
            model = ModelId[str(data["model"])]
        except KeyError:
            raise ConfigError("model", f"unknown model {data['model']!r}; expected one of {[m.name for m in ModelId]}")
        raw = data.get("params")
        if not isinstance(raw, dict):
            raise ConfigError("params", "expected a mapping of parameter names to values")
        names = PARAM_CLASSES[model].field_names()
        for k in raw:
            if k not in names:
                raise ConfigError(f"params.{k}", f"not a parameter of {model.name}; expected {list(names)}")
        for k in names:
            if k not in raw:
                raise ConfigError(f"params.{k}", "missing")
            _number(f"params.{k}", raw[k], positive=True)
        try:
            params = make_params(model, **raw)
        except ParameterError as e:
            raise ConfigError("params", str(e)) from None
    return RunConfig(cfg_cmd, model, params, _validate_options(cfg_cmd, opts, model))


def load_config(path: str, command: str | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError("--config", f"cannot read {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise ConfigError("--config", f"not valid YAML: {e}") from None
    return parse_config(data, command)


def _integrator(opts: dict, model: ModelId) -> IntegratorConfig:
    kw = {k: opts[k] for k in _INTEGRATOR_KEYS if k in opts}
    kw.setdefault("t_end", default_t_end(model))
    return IntegratorConfig(**kw)


def _out_path(out_dir: str, opts: dict, default: str) -> str:
    name = opts.get("output", default)
    return name if os.path.isabs(name) else os.path.join(out_dir, name)


def _fmt_state(x) -> str:
    return "(" + ", ".join(f"{v:.8g}" for v in x) + ")"


# --- commands ---------------------------------------------------------------------


def _cmd_equilibria(rc: RunConfig, out_dir: str) -> int:
    p = rc.params
    print(f"R0 = {reproduction_number(p):.10g}")
    for eq in all_equilibria(p):
        st = stability(p, eq.state)
        print(f"{eq.branch}: state={_fmt_state(eq.state)} feasible={eq.feasible} stability={st.kind}")
    return EXIT_OK


def _cmd_sweep(rc: RunConfig, out_dir: str, with_points: bool) -> int:
    p, o = rc.params, rc.options
    name = p.model.bifurcation_parameter
    lo, hi = o.get("range", (getattr(p, name) * 0.5, getattr(p, name) * 1.5))
    diagram = sweep_branch(
        p, lo, hi, samples=o.get("samples", 201), spacing=o.get("spacing", "linear"),
        points=with_points, feasible_only=o.get("feasible_only", False),
    )
    path = _out_path(out_dir, o, "diagram.csv" if with_points else "sweep.csv")
    rows = emit_diagram(diagram, path, p)
    print(f"{len(diagram.samples)} equilibria over {name} in [{lo:g}, {hi:g}] -> {path} ({len(rows)} rows)")
    for b in diagram.points:
        print(f"{b.kind}: {name}={b.param_value:.10g} state={_fmt_state(b.state)}")
    return EXIT_OK


def _cmd_hopf(rc: RunConfig, out_dir: str) -> int:
    p, o = rc.params, rc.options
    name = p.model.bifurcation_parameter
    tr = find_transcritical(p)
    print(f"transcritical: {name}={tr.param_value:.10g}")
    tp = turning_point(p)
    if tp.exists:
        print(f"turning: {name}={tp.param_value:.10g} state={_fmt_state(tp.state)}")
    else:
        print("turning: none")
    pts = find_hopf(p, feasible_only=o.get("feasible_only", True), s_max=o.get("s_max", 1e3), n=o.get("n", 4096))
    for b in pts:
        extra = f" omega_c={b.omega_c:.8g}" if b.omega_c else ""
        print(f"{b.kind}: {name}={b.param_value:.10g} state={_fmt_state(b.state)}{extra}")
    if not pts:
        print("hopf: none")
    return EXIT_OK


def _cmd_normalform(rc: RunConfig, out_dir: str) -> int:
    p, o = rc.params, rc.options
    hopfs = [b for b in find_hopf(p, feasible_only=o.get("feasible_only", True)) if b.kind == "hopf"]
    if not hopfs:
        print("normalform: no Hopf points")
        return EXIT_OK
    for b in hopfs:
        if p.model.dimension == 2:
            h = hopf_data(p, b, o.get("step", 1e-3))
            print(
                f"hopf {h.parameter}={h.param_value:.10g}: d={h.d:.6g} a={h.a:.6g} omega_c={h.omega_c:.6g} "
                f"class={h.hopf_class} {h.criticality} cycle={h.cycle_stability}"
            )
        if o.get("probe", p.model.dimension == 3):
            r = simulation_probe(p, b)
            print(
                f"probe {p.model.bifurcation_parameter}={b.param_value:.10g}: {r.criticality} "
                f"exponent={r.exponent:.3f} stable_side_decays={r.stable_side_decays}"
            )
    return EXIT_OK


def _cmd_simulate(rc: RunConfig, out_dir: str) -> int:
    p, o = rc.params, rc.options
    if "ic" not in o:
        raise ConfigError("options.ic", "missing initial condition")
    traj, verdict = simulate_and_classify(p, o["ic"], _integrator(o, p.model))
    path = _out_path(out_dir, o, "trajectory.csv")
    n = emit_trajectory(traj, path, o.get("downsample", 1))
    extra = ""
    if verdict.kind == "equilibrium":
        extra = f" branch={all_equilibria(p)[verdict.equilibrium_index].branch}"
    elif verdict.kind == "recurrent":
        extra = f" episodes={verdict.episodes} quiescent_fraction={verdict.quiescent_fraction:.3f}"
    elif verdict.kind == "limit_cycle":
        extra = f" period={verdict.period:.6g} amplitude={verdict.amplitude:.6g}"
    print(f"verdict={verdict.kind}{extra} -> {path} ({n} samples)")
    return EXIT_OK


def _cmd_classify(rc: RunConfig, out_dir: str) -> int:
    p, o = rc.params, rc.options
    if "ics" not in o:
        raise ConfigError("options.ics", "missing initial conditions")
    res = bistability_probe(p, o["ics"], _integrator(o, p.model), workers=o.get("workers", 1))
    eqs = all_equilibria(p)
    for ic, v in res.verdicts:
        label = f"equilibrium:{eqs[v.equilibrium_index].branch}" if v.kind == "equilibrium" else v.kind
        print(f"ic={_fmt_state(ic)} verdict={label}")
    print(f"bistable={res.bistable}")
    return EXIT_OK


def _cmd_reproduce(rc: RunConfig, out_dir: str) -> int:
    o = rc.options
    tables = [o["table"]] if "table" in o else ["T1", "T2", "T4", "AUTO"]
    ok = True
    for t in tables:
        rep = reproduce(t, o.get("case"), o.get("strict", False), o.get("workers", 1))
        for row in rep.rows:
            status = "pass" if row.passed else "FAIL"
            bad = [c.name for c in row.cells if not c.passed]
            print(f"{t} case {row.case}: {status}" + (f" ({', '.join(bad)})" if bad else ""))
        print(rep.summary())
        if "output" in o or out_dir != ".":
            name = o.get("output", "reproduce.csv")
            if len(tables) > 1:
                root, ext = os.path.splitext(name)
                name = f"{root}_{t}{ext}"
            emit_report(rep, name if os.path.isabs(name) else os.path.join(out_dir, name))
        ok &= rep.passed
    return EXIT_OK if ok else EXIT_MISMATCH


def run(rc: RunConfig, out_dir: str = ".") -> int:
    dispatch = {
        "equilibria": _cmd_equilibria,
        "sweep": lambda rc, d: _cmd_sweep(rc, d, False),
        "diagram": lambda rc, d: _cmd_sweep(rc, d, True),
        "hopf": _cmd_hopf,
        "normalform": _cmd_normalform,
        "simulate": _cmd_simulate,
        "classify": _cmd_classify,
        "reproduce": _cmd_reproduce,
    }
    return dispatch[rc.command](rc, out_dir)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epibif", description="Bifurcation analysis of epidemic-type ODE models.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML run configuration (optional for reproduce)")
    ap.add_argument("--out", default=".", help="directory for emitted files (default: current directory)")
    ap.add_argument("--table", choices=TABLES, help="table to reproduce")
    ap.add_argument("--case", type=int, help="restrict reproduce to one case")
    ap.add_argument("--strict", action="store_true", help="also check simulated dynamics verdicts")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            rc = load_config(args.config, args.command)
        elif args.command == "reproduce":
            rc = RunConfig("reproduce")
        else:
            raise ConfigError("--config", f"required for {args.command}")
        if args.table:
            rc.options["table"] = args.table
        if args.case is not None:
            rc.options["case"] = args.case
        if args.strict:
            rc.options["strict"] = True
        if rc.options.get("case") is not None and "table" not in rc.options:
            raise ConfigError("options.case", "needs a table")
        if not os.path.isdir(args.out):
            raise OSError(f"output directory {args.out} does not exist")
        return run(rc, args.out)
    except (ConfigError, ParameterError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
