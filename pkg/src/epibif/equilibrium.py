"""
Closed-form equilibria, reproduction numbers and turning points.

The infected equilibria of every model reduce to a quadratic in the infected
variable ``s`` (I, Y or A) whose coefficients are affine in the bifurcation
parameter ``p``::

    Q(s; p) = U(s) + p V(s)

so the branch can also be parametrised by ``s`` through ``p(s) = -U(s)/V(s)``.
The SIR model without treatment has a linear infected branch; it is returned
as a quadratic with zero leading coefficient.

Internal helpers take a plain ``dict`` of parameter values so that turning
points at non-physical (e.g. negative) parameter values can still be lifted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .models import DomainError, ModelId, ParameterSet, feasible, rhs

__all__ = [
    "QuadraticBranch",
    "EquilibriumPoint",
    "TurningPoint",
    "ResidualError",
    "uninfected_equilibrium",
    "infected_quadratic",
    "infected_equilibria",
    "all_equilibria",
    "turning_point",
    "classify_bifurcation_shape",
    "transcritical_value",
    "branch_parameter",
    "lift_state",
]

# tolerance used to call the discriminant zero, relative to B^2 + |4AC|
DISC_RTOL = 1e-12


class ResidualError(ArithmeticError):
    """A lifted equilibrium fails the residual check."""


@dataclass(frozen=True)
class QuadraticBranch:
    """Infected-equilibrium polynomial ``a s^2 + b s + c`` and its real roots."""

    a: float
    b: float
    c: float
    roots: tuple[float, ...]

    @property
    def discriminant(self) -> float:
        return self.b * self.b - 4 * self.a * self.c

    def __call__(self, s):
        return (self.a * s + self.b) * s + self.c


@dataclass(frozen=True)
class EquilibriumPoint:
    state: np.ndarray
    branch: str  # uninfected | infected_lower | infected_upper | double_root
    feasible: bool

    def __eq__(self, other):
        if not isinstance(other, EquilibriumPoint):
            return NotImplemented
        return (
            self.branch == other.branch
            and self.feasible == other.feasible
            and np.array_equal(self.state, other.state)
        )

    __hash__ = None


@dataclass(frozen=True)
class TurningPoint:
    param_value: float
    state: np.ndarray | None
    exists: bool
    parameter: str = ""
    discriminant_roots: tuple[float, ...] = field(default=(), repr=False)


# --- coefficients -------------------------------------------------------------


def _coefficients(model: ModelId, v: dict) -> tuple[float, float, float]:
    if model is ModelId.SIR_CONCAVE:
        m = v["d"] + v["gamma"] + v["epsilon"]
        return 0.0, m * (v["d"] * v["k"] + v["beta"]), m * v["d"] - v["beta"] * v["Lambda"]
    if model is ModelId.SIR_TREATMENT:
        m = v["d"] + v["gamma"] + v["epsilon"]
        g = v["d"] * v["k"] + v["beta"]
        om, al, d, bL = v["omega"], v["alpha"], v["d"], v["beta"] * v["Lambda"]
        return m * g, (g * om + d) * m + g * al - bL, (m * om + al) * d - bL * om
    if model is ModelId.INHOST_CONVEX:
        A, B, C, D = v["A"], v["B"], v["C"], v["D"]
        return A + B, B * C + D - A - B, C * (D - B)
    a, b = _compounds(v)
    if model is ModelId.AUTOIMMUNE_2D:
        s1 = v["sigma1"]
        return b * s1, v["beta"] * s1, -v["mu_n"] * a
    K = v["mu_d"] * (v["mu_n"] + v["xi"]) / (
        (v["v_tilde"] + v["mu_G"]) * (v["c"] * v["d"] * v["xi"] + v["mu_d"]) * v["sigma1"]
    )
    lift = -v["f"] * v["gamma"] * v["v_tilde"] * v["lambda_E"] + (v["b1"] + v["mu_A"]) * (
        v["mu_G"] + v["v_tilde"]
    ) * v["mu_E"]
    return v["pi1"] * v["lambda_E"], v["beta"] * v["mu_E"], K * lift


def _compounds(v: dict) -> tuple[float, float]:
    a = v["f"] * v["v_tilde"] * v["gamma"] * v["lambda_E"] / (v["mu_E"] * (v["v_tilde"] + v["mu_G"]))
    return a - v["b1"] - v["mu_A"], v["pi1"] * v["lambda_E"] / v["mu_E"]


def _affine_parts(model: ModelId, v: dict) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient vectors U, V with coefficients(p) = U + p V."""
    name = model.bifurcation_parameter
    u = np.array(_coefficients(model, {**v, name: 0.0}))
    w = np.array(_coefficients(model, {**v, name: 1.0}))
    return u, w - u


def _real_roots(a: float, b: float, c: float) -> tuple[float, ...]:
    if a == 0.0:
        if b == 0.0:
            return ()
        return (-c / b,)
    disc = b * b - 4 * a * c
    scale = b * b + abs(4 * a * c)
    if abs(disc) <= DISC_RTOL * scale:
        return (-b / (2 * a),)
    if disc < 0:
        return ()
    # larger-magnitude root first, the other from the product of roots
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    r1 = q / a
    r2 = c / q if q != 0 else -b / a - r1
    return tuple(sorted((r1, r2)))


def _quadratic(model: ModelId, v: dict) -> QuadraticBranch:
    a, b, c = _coefficients(model, v)
    return QuadraticBranch(a, b, c, _real_roots(a, b, c))


def infected_quadratic(p: ParameterSet) -> QuadraticBranch:
    """Coefficients (as printed for each model) and real roots of the infected polynomial."""
    return _quadratic(p.model, p.as_dict())


# --- lifting -----------------------------------------------------------------


def _lift_raw(model: ModelId, v: dict, s):
    """Back-substitution without pole checks; ``s`` and ``v`` values may be arrays."""
    if model in (ModelId.SIR_CONCAVE, ModelId.SIR_TREATMENT):
        den = (v["d"] * v["k"] + v["beta"]) * s + v["d"]
        return [v["Lambda"] * (1 + v["k"] * s) / den, s]
    if model is ModelId.INHOST_CONVEX:
        den = (v["A"] + v["B"]) * s + v["B"] * v["C"]
        return [(s + v["C"]) / den, s]
    if model is ModelId.AUTOIMMUNE_2D:
        _, b = _compounds(v)
        return [s, (b * s + v["beta"]) * s / v["mu_n"]]
    Rn = (v["beta"] * v["mu_E"] + v["pi1"] * v["lambda_E"] * s) * s / (v["mu_E"] * (v["mu_n"] + v["xi"]))
    return [s, Rn, v["c"] * v["xi"] * Rn / v["mu_d"]]


_LIFT_DENOMINATOR = {
    ModelId.SIR_CONCAVE: ("(dk+beta)*I+d", lambda v, s: (v["d"] * v["k"] + v["beta"]) * s + v["d"]),
    ModelId.SIR_TREATMENT: ("(dk+beta)*I+d", lambda v, s: (v["d"] * v["k"] + v["beta"]) * s + v["d"]),
    ModelId.INHOST_CONVEX: ("(A+B)*Y+B*C", lambda v, s: (v["A"] + v["B"]) * s + v["B"] * v["C"]),
}


def _lift(model: ModelId, v: dict, s: float) -> np.ndarray:
    if model in _LIFT_DENOMINATOR:
        name, den = _LIFT_DENOMINATOR[model]
        if den(v, s) == 0:
            raise DomainError(name, (math.nan, s))
    return np.array(_lift_raw(model, v, s), dtype=float)


def lift_state(p: ParameterSet, s: float) -> np.ndarray:
    """Full equilibrium state from the infected component via back-substitution."""
    return _lift(p.model, p.as_dict(), s)


def _residual_ok(p: ParameterSet, x: np.ndarray, rtol: float = 1e-9) -> bool:
    r = rhs(p, x)
    return float(np.max(np.abs(r))) < rtol * (1 + float(np.max(np.abs(x))))


# --- public operations ----------------------------------------------------------


def reproduction_number(p: ParameterSet) -> float:
    """R0 for the epidemic models; the compound ``a`` for the autoimmune ones."""
    model = p.model
    if model is ModelId.SIR_CONCAVE:
        return p.beta * p.Lambda / (p.d * (p.d + p.gamma + p.epsilon))
    if model is ModelId.SIR_TREATMENT:
        return p.beta * p.Lambda / (p.d * (p.d + p.gamma + p.epsilon + p.alpha / p.omega))
    if model is ModelId.INHOST_CONVEX:
        return p.B / p.D
    return _compounds(p.as_dict())[0]


def uninfected_equilibrium(p: ParameterSet) -> tuple[EquilibriumPoint, float]:
    """Disease-free state and R0 (the compound ``a`` for the autoimmune models)."""
    model = p.model
    if model in (ModelId.SIR_CONCAVE, ModelId.SIR_TREATMENT):
        x = np.array([p.Lambda / p.d, 0.0])
    elif model is ModelId.INHOST_CONVEX:
        x = np.array([1 / p.D, 0.0])
    else:
        x = np.zeros(model.dimension)
    return EquilibriumPoint(x, "uninfected", True), reproduction_number(p)


def infected_equilibria(p: ParameterSet, check: bool = True) -> list[EquilibriumPoint]:
    """Infected equilibria, ordered by the infected component.

    Every root of the infected polynomial is lifted, including negative ones;
    ``feasible`` tells them apart. A zero root at the transcritical point is
    kept (it coincides with the uninfected state).
    """
    q = infected_quadratic(p)
    if len(q.roots) == 2:
        tags = ("infected_lower", "infected_upper")
    elif len(q.roots) == 1:
        tags = ("infected_upper",) if q.a == 0 else ("double_root",)
    else:
        tags = ()
    out = []
    for s, tag in zip(q.roots, tags):
        try:
            x = lift_state(p, s)
        except DomainError as exc:
            raise DomainError(f"{exc.denominator} (root {s!r})", exc.state) from None
        if check and not _residual_ok(p, x):
            raise ResidualError(f"equilibrium residual too large at root {s!r}: {rhs(p, x)}")
        out.append(EquilibriumPoint(x, tag, feasible(x)))
    return out


def all_equilibria(p: ParameterSet) -> list[EquilibriumPoint]:
    return [uninfected_equilibrium(p)[0], *infected_equilibria(p)]


def transcritical_value(p: ParameterSet) -> float:
    """Bifurcation-parameter value where the constant coefficient vanishes."""
    u, v = _affine_parts(p.model, p.as_dict())
    return float(-u[2] / v[2])


def branch_parameter(p: ParameterSet, s):
    """Bifurcation-parameter value that places ``s`` on the infected branch.

    Returns nan where the branch relation is singular.
    """
    u, v = _affine_parts(p.model, p.as_dict())
    s = np.asarray(s, dtype=float)
    num = (u[0] * s + u[1]) * s + u[2]
    den = (v[0] * s + v[1]) * s + v[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den != 0, -num / den, np.nan)
    return out if out.ndim else float(out)


def _discriminant_poly(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Coefficients (highest first) of the discriminant as a quadratic in p."""
    a = np.array([v[0], u[0]])
    b = np.array([v[1], u[1]])
    c = np.array([v[2], u[2]])
    return np.polysub(np.polymul(b, b), 4 * np.polymul(a, c))


def turning_point(p: ParameterSet, parameter: str | None = None) -> TurningPoint:
    """Fold of the infected branch with respect to the model's bifurcation parameter.

    INHOST_CONVEX uses the closed form; the other models bracket the
    discriminant on a geometric grid over (0, 1e4 * p_S] and refine with
    brentq, keeping the root closest to the transcritical value.
    """
    model = p.model
    name = model.bifurcation_parameter
    if parameter is not None and parameter != name:
        raise ValueError(f"{model.value} is analysed with respect to {name}, not {parameter}")
    v = p.as_dict()

    if model is ModelId.INHOST_CONVEX:
        A, C, D = p.A, p.C, p.D
        pt = (-A + D + 2 * math.sqrt(A * C * D)) / (C + 1)
        candidates = (pt,)
    else:
        u, w = _affine_parts(model, v)
        poly = _discriminant_poly(u, w)
        if w[0] == 0 and u[0] == 0:
            return TurningPoint(math.nan, None, False, name)
        p_s = -u[2] / w[2]
        hi = 1e4 * abs(p_s) if p_s != 0 else 1e4
        grid = np.geomspace(hi * 1e-10, hi, 512)
        vals = np.polyval(poly, grid)
        found = []
        for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
            lo_, hi_ = grid[i], grid[i + 1]
            if vals[i] == 0:
                found.append(lo_)
                continue
            found.append(brentq(lambda x: np.polyval(poly, x), lo_, hi_, xtol=1e-14, rtol=1e-14))
        # only folds where the branch stays genuinely quadratic
        found = [x for x in found if u[0] + x * w[0] > 0]
        if not found:
            return TurningPoint(math.nan, None, False, name)
        candidates = tuple(sorted(set(found), key=lambda x: abs(x - p_s)))
        pt = candidates[0]

    vt = {**v, name: pt}
    a, b, _ = _coefficients(model, vt)
    if not a > 0:
        return TurningPoint(pt, None, False, name, tuple(candidates))
    s = -b / (2 * a)
    return TurningPoint(pt, _lift(model, vt, s), True, name, tuple(candidates))


def classify_bifurcation_shape(p: ParameterSet, tp: TurningPoint | None = None) -> str:
    """One of ``forward``, ``backward_positive``, ``backward_negative`` or ``none``."""
    if tp is None:
        tp = turning_point(p)
    if tp.exists:
        s = tp.state[p.model.infected_index]
        return "backward_positive" if s > 0 else "backward_negative"
    u, v = _affine_parts(p.model, p.as_dict())
    p_s = -u[2] / v[2] if v[2] != 0 else math.nan
    return "forward" if math.isfinite(p_s) and p_s > 0 else "none"
