"""
Shape of the incidence-type curves and their intersections with ray lines.

Four curves are available, all as functions of the infected variable s:

``f3``
    beta*S*s/(1+k*s) at fixed S (saturating incidence);
``f4``
    f3 minus the treatment term alpha*s/(omega+s);
``f7_fixed_X``
    (B + A*s/(s+C))*X*s at fixed X (convex in-host incidence);
``f7_along_branch``
    f7 with X eliminated through the first equilibrium equation,
    s*((A+B)s + BC) / ((A+B)s^2 + (BC+D)s + CD).

The natural rays are g1(s) = (d+gamma+epsilon)*s for the SIR curves and
g2(s) = s for the in-host ones. Positive intersections of curve and ray are
the candidate infected equilibria.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .models import ModelId, ParameterSet

__all__ = ["IncidenceCurve", "ShapeReport", "incidence_curve", "shape_classify", "ray_intersections", "default_slope"]

KINDS = ("f3", "f4", "f7_fixed_X", "f7_along_branch")


@dataclass(frozen=True)
class IncidenceCurve:
    kind: str
    f: Callable
    df: Callable
    d2f: Callable
    zero_susceptible: Callable  # value of the curve with the susceptible set to 0
    d_susceptible: Callable  # derivative with respect to the susceptible variable


@dataclass(frozen=True)
class ShapeReport:
    kind: str
    satisfies_3a: bool
    satisfies_3b: bool
    concavity: str  # concave | convex | convex_concave | mixed
    inflection: float | None
    slope: float
    intersections: tuple[float, ...]
    grid: tuple[float, float, int]

    @property
    def intersection_count(self) -> int:
        return len(self.intersections)


def incidence_curve(kind: str, p: ParameterSet, fixed: float | None = None) -> IncidenceCurve:
    """Analytic curve with first and second derivatives in the infected variable.

    ``fixed`` is the susceptible level S (f3, f4) or X (f7_fixed_X).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown incidence curve {kind!r}; expected one of {KINDS}")
    if kind in ("f3", "f4"):
        if p.model not in (ModelId.SIR_CONCAVE, ModelId.SIR_TREATMENT):
            raise ValueError(f"{kind} needs SIR parameters")
        if kind == "f4" and p.model is not ModelId.SIR_TREATMENT:
            raise ValueError("f4 needs SIR_TREATMENT parameters")
        if fixed is None or fixed <= 0:
            raise ValueError(f"{kind} needs a positive fixed susceptible value")
        b, k, S = p.beta, p.k, float(fixed)
        al, om = (p.alpha, p.omega) if kind == "f4" else (0.0, 1.0)
        return IncidenceCurve(
            kind,
            lambda s: b * S * s / (1 + k * s) - al * s / (om + s),
            lambda s: b * S / (1 + k * s) ** 2 - al * om / (om + s) ** 2,
            lambda s: -2 * b * k * S / (1 + k * s) ** 3 + 2 * al * om / (om + s) ** 3,
            lambda s: -al * s / (om + s),
            lambda s: b * s / (1 + k * s),
        )
    if p.model is not ModelId.INHOST_CONVEX:
        raise ValueError(f"{kind} needs INHOST_CONVEX parameters")
    A, B, C, D = p.A, p.B, p.C, p.D
    if kind == "f7_fixed_X":
        if fixed is None or fixed <= 0:
            raise ValueError("f7_fixed_X needs a positive fixed X value")
        X = float(fixed)
        return IncidenceCurve(
            kind,
            lambda s: (B + A * s / (s + C)) * X * s,
            lambda s: A * C * X * s / (s + C) ** 2 + (B + A * s / (s + C)) * X,
            lambda s: 2 * A * C * C * X / (s + C) ** 3,
            lambda s: 0.0 * s,
            lambda s: (B + A * s / (s + C)) * s,
        )
    AB = A + B
    den = lambda s: AB * s * s + (B * C + D) * s + C * D
    return IncidenceCurve(
        kind,
        lambda s: s * (AB * s + B * C) / den(s),
        lambda s: D * (AB * s * s + 2 * AB * C * s + B * C * C) / den(s) ** 2,
        lambda s: -2 * D * (AB ** 2 * s ** 3 + 3 * C * AB ** 2 * s ** 2 + 3 * AB * B * C * C * s + (B * B * C - A * D) * C * C)
        / den(s) ** 3,
        # along the branch X is eliminated; the susceptible checks use the fixed-X form at X = 1/D
        lambda s: 0.0 * s,
        lambda s: (B + A * s / (s + C)) * s,
    )


def default_slope(kind: str, p: ParameterSet) -> float:
    if kind in ("f3", "f4"):
        return p.d + p.gamma + p.epsilon
    return 1.0


def _grid(s_max: float, n: int) -> np.ndarray:
    return np.geomspace(s_max * 1e-9, s_max, n)


def ray_intersections(
    curve: IncidenceCurve, slope: float, s_max: float = 1e3, n: int = 4096
) -> list[float]:
    """Positive abscissae in (0, s_max] where the curve meets the ray slope*s."""
    g = lambda s: curve.f(s) - slope * s
    grid = _grid(s_max, n)
    vals = g(grid)
    out = []
    for i in range(len(grid) - 1):
        if vals[i] == 0:
            out.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            out.append(brentq(g, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15))
    if vals[-1] == 0:
        out.append(float(grid[-1]))
    return out


def shape_classify(
    kind: str,
    p: ParameterSet,
    fixed: float | None = None,
    s_max: float = 1e3,
    n: int = 4096,
    slope: float | None = None,
) -> ShapeReport:
    """Check the incidence conditions on a grid and classify convexity.

    ``satisfies_3a`` means the curve vanishes when either the susceptible or
    the infected variable is zero; ``satisfies_3b`` means it increases in both
    variables on the grid.
    Concavity comes from the sign pattern of the second derivative; a single
    change from positive to negative is ``convex_concave`` with the inflection
    refined by bisection.
    """
    c = incidence_curve(kind, p, fixed)
    grid = _grid(s_max, n)
    sat_3a = bool(c.f(0.0) == 0 and np.all(np.asarray(c.zero_susceptible(grid)) == 0))
    sat_3b = bool(np.all(c.df(grid) > 0) and np.all(c.d_susceptible(grid) > 0))
    d2 = c.d2f(grid)
    inflection = None
    if np.all(d2 < 0):
        concavity = "concave"
    elif np.all(d2 > 0):
        concavity = "convex"
    else:
        sign = np.sign(d2)
        changes = np.nonzero(sign[:-1] != sign[1:])[0]
        if len(changes) == 1 and sign[0] > 0:
            i = changes[0]
            inflection = brentq(c.d2f, grid[i], grid[i + 1], xtol=1e-8)
            concavity = "convex_concave"
        else:
            concavity = "mixed"
    m = default_slope(kind, p) if slope is None else slope
    xs = ray_intersections(c, m, s_max, n)
    return ShapeReport(kind, sat_3a, sat_3b, concavity, inflection, m, tuple(xs), (float(grid[0]), s_max, n))
