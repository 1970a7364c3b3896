"""
Transcritical and Hopf points along the infected branch, and sampled
bifurcation diagrams.

Hopf candidates are located by eliminating the bifurcation parameter through
the branch relation ``p = p(s)`` (``s`` is the infected component), scanning
the Hopf function (``T`` for planar systems, ``c1*c2 - c0`` for the cubic one)
on a geometric grid in ``s`` and polishing each root with Newton's method on
the joint system ``{Q(s; p) = 0, Hopf function = 0}``.
"""

from __future__ import annotations

import math
from types import SimpleNamespace
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .equilibrium import (
    EquilibriumPoint,
    _affine_parts,
    _coefficients,
    _lift,
    _lift_raw,
    all_equilibria,
    branch_parameter,
    infected_quadratic,
    transcritical_value,
    turning_point,
)
from .models import DomainError, ParameterError, ParameterSet, feasible, jacobian, jacobian_entries
from .spectral import StabilityReport, char_poly_from_matrix, classify_eigenvalues, eigenvalues

__all__ = [
    "BifurcationPoint",
    "BranchSample",
    "BranchDiagram",
    "NumericalFailure",
    "find_transcritical",
    "find_hopf",
    "hopf_function",
    "sweep_branch",
]

HOPF_DELTA_MIN = 1e-12
NEWTON_TOL = 1e-11


class NumericalFailure(ArithmeticError):
    """An iterative solver did not converge; ``bracket`` records where."""

    def __init__(self, message: str, bracket=None):
        self.bracket = bracket
        super().__init__(message if bracket is None else f"{message} (bracket {bracket})")


@dataclass(frozen=True)
class BifurcationPoint:
    kind: str  # transcritical | turning | hopf | neutral_saddle
    param_value: float
    state: np.ndarray
    omega_c: float | None = None
    branch: str = ""
    feasible: bool = True

    def __eq__(self, other):
        if not isinstance(other, BifurcationPoint):
            return NotImplemented
        return (
            (self.kind, self.param_value, self.omega_c, self.branch, self.feasible)
            == (other.kind, other.param_value, other.omega_c, other.branch, other.feasible)
            and np.array_equal(self.state, other.state)
        )

    __hash__ = None


@dataclass
class BranchSample:
    param: float
    equilibrium: EquilibriumPoint
    stability: StabilityReport


@dataclass
class BranchDiagram:
    parameter: str
    param_range: tuple[float, float]
    samples: list[BranchSample] = field(default_factory=list)
    points: list[BifurcationPoint] = field(default_factory=list)
    dimension: int = 2


def find_transcritical(p: ParameterSet) -> BifurcationPoint:
    """Crossing of the uninfected and infected branches (R0 = 1, or a = 0)."""
    ps = transcritical_value(p)
    name = p.model.bifurcation_parameter
    v = {**p.as_dict(), name: ps}
    if p.model.value.startswith("SIR"):
        x = np.array([ps / p.d, 0.0])
    elif p.model.value == "INHOST_CONVEX":
        x = np.array([1 / p.D, 0.0])
    else:
        x = np.zeros(p.model.dimension)
    _, _, c = _coefficients(p.model, v)
    assert abs(c) <= 1e-10 * max(1.0, *(abs(t) for t in _affine_parts(p.model, p.as_dict())[0])), c
    return BifurcationPoint("transcritical", ps, x, None, "uninfected", True)


def _with_param(p: ParameterSet, value: float) -> ParameterSet | None:
    try:
        return p.replace(**{p.model.bifurcation_parameter: float(value)})
    except ParameterError:
        return None


def _hopf_and_scale(J: np.ndarray) -> tuple[float, float]:
    cp = char_poly_from_matrix(J)
    if cp.degree == 2:
        return cp.coeffs[0], abs(J[0, 0]) + abs(J[1, 1]) + 1e-300
    c2, c1, c0 = cp.coeffs
    return c1 * c2 - c0, abs(c1 * c2) + abs(c0) + 1e-300


def hopf_function(p: ParameterSet, x) -> float:
    """T (planar) or c1*c2 - c0 (cubic) at state ``x``."""
    return _hopf_and_scale(jacobian(p, x))[0]


def _on_branch(p: ParameterSet, s: float):
    """Hopf function along the branch at infected value s (nan when undefined)."""
    pv = branch_parameter(p, s)
    if not (math.isfinite(pv) and pv > 0):
        return math.nan, pv
    q = _with_param(p, pv)
    try:
        x = _lift(p.model, q.as_dict(), s)
        return hopf_function(q, x), pv
    except DomainError:
        return math.nan, pv


def _on_branch_grid(p: ParameterSet, grid: np.ndarray) -> np.ndarray:
    """Vectorised Hopf function along the branch; nan where undefined."""
    pv = branch_parameter(p, grid)
    ok = np.isfinite(pv) & (pv > 0)
    pv = np.where(ok, pv, 1.0)
    v = {**p.as_dict(), p.model.bifurcation_parameter: pv}
    with np.errstate(all="ignore"):
        x = _lift_raw(p.model, v, grid)
        J = jacobian_entries(SimpleNamespace(model=p.model, **v), x)
        if len(J) == 2:
            H = -(J[0][0] + J[1][1])
        else:
            c2 = -(J[0][0] + J[1][1] + J[2][2])
            c1 = (
                J[0][0] * J[1][1] - J[0][1] * J[1][0]
                + J[0][0] * J[2][2] - J[0][2] * J[2][0]
                + J[1][1] * J[2][2] - J[1][2] * J[2][1]
            )
            det = (
                J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1])
                - J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0])
                + J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0])
            )
            H = c1 * c2 + det
    H = np.broadcast_to(np.asarray(H, dtype=float), grid.shape)
    return np.where(ok & np.isfinite(H), H, np.nan)


def _newton_polish(p: ParameterSet, s: float, pv: float, max_iter: int = 100):
    """Polish (s, p) on {Q = 0, H = 0}; returns (s, p, relative residuals)."""
    model = p.model
    name = model.bifurcation_parameter
    base = p.as_dict()

    def resid(z):
        s_, p_ = z
        v = {**base, name: p_}
        a, b, c = _coefficients(model, v)
        qs = abs(a * s_ * s_) + abs(b * s_) + abs(c) + 1e-300
        q = _with_param(p, p_)
        if q is None:
            raise NumericalFailure("Newton left the admissible parameter range", (s_, p_))
        H, hs = _hopf_and_scale(jacobian(q, _lift(model, v, s_)))
        return np.array([((a * s_ + b) * s_ + c) / qs, H / hs])

    z = np.array([s, pv], dtype=float)
    r = resid(z)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < NEWTON_TOL:
            return z, r
        G = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * max(abs(z[j]), 1e-8)
            e = np.zeros(2)
            e[j] = h
            G[:, j] = (resid(z + e) - resid(z - e)) / (2 * h)
        try:
            dz = np.linalg.solve(G, -r)
        except np.linalg.LinAlgError:
            break
        z_new = z + dz
        r_new = resid(z_new)
        if np.max(np.abs(r_new)) >= np.max(np.abs(r)):
            # Newton stalled at round-off level
            if np.max(np.abs(r)) < 1e3 * NEWTON_TOL:
                return z, r
            break
        z, r = z_new, r_new
    if np.max(np.abs(r)) < NEWTON_TOL:
        return z, r
    raise NumericalFailure("Hopf refinement did not converge", (float(z[0]), float(z[1])))


def _scan_grid(s_max: float, n: int, negative: bool) -> np.ndarray:
    pos = np.geomspace(s_max * 1e-11, s_max, n)
    if not negative:
        return pos
    return np.concatenate([-pos[::-1], pos])


def find_hopf(
    p: ParameterSet,
    feasible_only: bool = True,
    s_max: float = 1e3,
    n: int = 4096,
) -> list[BifurcationPoint]:
    """Hopf and neutral-saddle points on the infected branch, sorted by parameter.

    Only points with a positive bifurcation-parameter value are returned.
    ``feasible_only=False`` also reports points with negative state components.
    """
    grid = _scan_grid(s_max, n, negative=not feasible_only)
    vals = _on_branch_grid(p, grid)
    found: list[BifurcationPoint] = []
    seen: list[tuple[float, float]] = []
    for i in range(len(grid) - 1):
        h0, h1 = vals[i], vals[i + 1]
        if not (np.isfinite(h0) and np.isfinite(h1)) or h0 * h1 > 0 or (h0 == 0 and i > 0):
            continue
        a, b = grid[i], grid[i + 1]
        if h0 == 0:
            s = a
        elif h1 == 0:
            s = b
        else:
            try:
                s = brentq(lambda t: _on_branch(p, t)[0], a, b, xtol=1e-15, rtol=1e-15)
            except ValueError:
                continue
        H, pv = _on_branch(p, s)
        # a pole of the branch relation flips the sign without a zero
        q = _with_param(p, pv)
        if q is None or not math.isfinite(H):
            continue
        x = _lift(p.model, q.as_dict(), s)
        _, hs = _hopf_and_scale(jacobian(q, x))
        if abs(H) > 1e-6 * hs:
            continue
        (s, pv), _ = _newton_polish(p, s, pv)
        if any(abs(s - s0) <= 1e-9 * max(1, abs(s)) and abs(pv - p0) <= 1e-9 * max(1, abs(pv)) for s0, p0 in seen):
            continue
        seen.append((s, pv))
        q = _with_param(p, pv)
        x = _lift(p.model, q.as_dict(), s)
        ok = feasible(x)
        if feasible_only and not ok:
            continue
        cp = char_poly_from_matrix(jacobian(q, x))
        if cp.degree == 2:
            is_hopf = cp.coeffs[1] > HOPF_DELTA_MIN
            omega = math.sqrt(cp.coeffs[1]) if is_hopf else None
        else:
            is_hopf = cp.coeffs[1] > 0
            omega = math.sqrt(cp.coeffs[1]) if is_hopf else None
        found.append(
            BifurcationPoint(
                "hopf" if is_hopf else "neutral_saddle", float(pv), x, omega, _branch_tag(q, s), ok
            )
        )
    found.sort(key=lambda b: (b.param_value, b.state[p.model.infected_index]))
    return found


def _branch_tag(q: ParameterSet, s: float) -> str:
    roots = infected_quadratic(q).roots
    if len(roots) == 2:
        return "infected_lower" if abs(s - roots[0]) < abs(s - roots[1]) else "infected_upper"
    if len(roots) == 1 and q.model.value != "SIR_CONCAVE":
        return "double_root"
    return "infected_upper"


def _point_stability(p: ParameterSet, b: BifurcationPoint) -> StabilityReport:
    q = _with_param(p, b.param_value) or p
    ev = eigenvalues(char_poly_from_matrix(jacobian(q, b.state)))
    return StabilityReport(ev, classify_eigenvalues(ev))


def sweep_branch(
    p: ParameterSet,
    lo: float,
    hi: float,
    samples: int = 201,
    spacing: str = "linear",
    points: bool = True,
    feasible_only: bool = False,
) -> BranchDiagram:
    """Sample all equilibria with their stability over [lo, hi] of the bifurcation parameter.

    ``points=True`` merges transcritical, turning and Hopf points that fall in
    the range. ``feasible_only`` drops equilibria with negative components.
    """
    if samples < 2 and lo != hi:
        raise ValueError("a sweep needs at least 2 samples")
    if lo > hi:
        lo, hi = hi, lo
    if lo <= 0:
        raise ParameterError(f"{p.model.bifurcation_parameter} range must be positive, got [{lo}, {hi}]")
    if lo == hi:
        grid = np.array([lo])
    elif spacing == "geometric":
        grid = np.geomspace(lo, hi, samples)
    elif spacing == "linear":
        grid = np.linspace(lo, hi, samples)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")

    diagram = BranchDiagram(p.model.bifurcation_parameter, (float(lo), float(hi)), dimension=p.model.dimension)
    for value in grid:
        q = _with_param(p, value)
        for eq in all_equilibria(q):
            if feasible_only and not eq.feasible:
                continue
            ev = eigenvalues(char_poly_from_matrix(jacobian(q, eq.state)))
            diagram.samples.append(BranchSample(float(value), eq, StabilityReport(ev, classify_eigenvalues(ev))))

    if points:
        pts = [find_transcritical(p)]
        tp = turning_point(p)
        if tp.exists and tp.param_value > 0:
            pts.append(BifurcationPoint("turning", tp.param_value, tp.state, None, "double_root", feasible(tp.state)))
        pts.extend(find_hopf(p, feasible_only=feasible_only))
        diagram.points = [b for b in pts if lo <= b.param_value <= hi and (b.feasible or not feasible_only)]
        diagram.points.sort(key=lambda b: b.param_value)
    return diagram
