"""
Characteristic polynomials, eigenvalues, stability classes and the
Hopf-feasibility indicators h1 (SIR with treatment) and h2 (in-host model).

Planar polynomials are stored as ``(T, Delta)`` with
``P(L) = L^2 + T L + Delta``, so ``T = -trace(J)`` and ``Delta = det(J)``.
Cubic ones are ``(c2, c1, c0)`` with ``P(L) = L^3 + c2 L^2 + c1 L + c0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .equilibrium import branch_parameter
from .models import ModelId, ParameterSet, jacobian, rhs

__all__ = [
    "CharPoly",
    "StabilityReport",
    "ContractError",
    "char_poly",
    "char_poly_from_matrix",
    "eigenvalues",
    "classify_eigenvalues",
    "stability",
    "h_value",
    "h_negative_intervals",
    "h_indicator",
]

HYPERBOLIC_RTOL = 1e-9


class ContractError(ValueError):
    """Input violates a documented precondition (e.g. not an equilibrium)."""


@dataclass(frozen=True)
class CharPoly:
    coeffs: tuple[float, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    @property
    def T(self) -> float:
        if self.degree != 2:
            raise AttributeError("T is defined for planar polynomials only")
        return self.coeffs[0]

    @property
    def Delta(self) -> float:
        if self.degree != 2:
            raise AttributeError("Delta is defined for planar polynomials only")
        return self.coeffs[1]

    def __call__(self, lam):
        out = 1.0
        for c in self.coeffs:
            out = out * lam + c
        return out

    def hopf_function(self) -> float:
        """T for planar systems, c1*c2 - c0 for cubic ones; zero at a Hopf point."""
        if self.degree == 2:
            return self.coeffs[0]
        c2, c1, c0 = self.coeffs
        return c1 * c2 - c0


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: tuple[complex, ...]
    kind: str

    @property
    def stable(self) -> bool:
        return self.kind in ("stable_node", "stable_focus")


def char_poly_from_matrix(J: np.ndarray) -> CharPoly:
    J = np.asarray(J, dtype=float)
    if J.shape == (2, 2):
        return CharPoly((-(J[0, 0] + J[1, 1]), J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]))
    if J.shape == (3, 3):
        c2 = -np.trace(J)
        c1 = (
            J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
            + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
            + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1]
        )
        c0 = -np.linalg.det(J)
        return CharPoly((float(c2), float(c1), float(c0)))
    raise ValueError(f"unsupported Jacobian shape {J.shape}")


def char_poly(p: ParameterSet, x, check: bool = True, rtol: float = 1e-8) -> CharPoly:
    """Characteristic polynomial of the linearisation at the equilibrium ``x``."""
    x = np.asarray(x, dtype=float)
    if check:
        r = rhs(p, x)
        if np.max(np.abs(r)) > rtol * (1 + np.max(np.abs(x))):
            raise ContractError(f"state {x} is not an equilibrium (residual {r})")
    return char_poly_from_matrix(jacobian(p, x))


def eigenvalues(cp: CharPoly) -> tuple[complex, ...]:
    if cp.degree == 2:
        T, D = cp.coeffs
        disc = T * T - 4 * D
        if disc >= 0:
            q = -0.5 * (T + math.copysign(math.sqrt(disc), T))
            if q == 0:
                return (0j, 0j)
            r = sorted((q, D / q))
            return (complex(r[0]), complex(r[1]))
        re, im = -T / 2, math.sqrt(-disc) / 2
        return (complex(re, -im), complex(re, im))
    roots = np.roots((1.0, *cp.coeffs)).astype(complex)
    # two Newton polishing steps per root
    dcoef = np.polyder(np.array((1.0, *cp.coeffs)))
    for _ in range(2):
        with np.errstate(all="ignore"):
            step = cp(roots) / np.polyval(dcoef, roots)
        roots = np.where(np.isfinite(step), roots - step, roots)
    roots = [complex(r.real, 0.0) if abs(r.imag) < 1e-14 * max(1.0, abs(r)) else complex(r) for r in roots]
    return tuple(sorted(roots, key=lambda z: (z.real, z.imag)))


def classify_eigenvalues(eigs) -> str:
    eigs = list(eigs)
    if any(abs(z.real) < HYPERBOLIC_RTOL * max(1.0, abs(z)) for z in eigs):
        return "nonhyperbolic"
    re = [z.real for z in eigs]
    complex_pair = any(abs(z.imag) > 0 for z in eigs)
    if all(r < 0 for r in re):
        return "stable_focus" if complex_pair else "stable_node"
    if all(r > 0 for r in re):
        return "unstable_focus" if complex_pair else "unstable_node"
    return "saddle"


def stability(p: ParameterSet, x, check: bool = True) -> StabilityReport:
    ev = eigenvalues(char_poly(p, x, check=check))
    return StabilityReport(ev, classify_eigenvalues(ev))


# --- Hopf-feasibility indicators ------------------------------------------------


def _h1(p, I):
    d, k, b, w = p.d, p.k, p.beta, p.omega
    inner = (k * I + 1) * d * d * (w + I) ** 2 - b * (p.epsilon + p.gamma) * I * (w + I) ** 2 - p.alpha * b * w * I
    return (d * k * I + b * I + d) * inner / d


def _h2(p, Y, eliminate: bool):
    A, B, C, D = p.A, p.B, p.C, p.D
    if eliminate:
        num = (A * C * (D - 1) - D * D) * Y * Y - (A * C * (D - 1) + 2 * C * D * D) * Y - C * C * D * D
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / (Y - 1)
    return D * (A + B) * Y * Y + (2 * C * D * (A + B) - A * C) * Y + B * C * C * D


def h_value(p: ParameterSet, s, eliminate: bool = False):
    """h1(I) for SIR_TREATMENT or h2(Y) for INHOST_CONVEX.

    h1 does not depend on Lambda (it is already eliminated). For h2,
    ``eliminate=True`` substitutes the branch value of B at each Y.
    """
    s = np.asarray(s, dtype=float)
    if p.model is ModelId.SIR_TREATMENT:
        out = _h1(p, s)
    elif p.model is ModelId.INHOST_CONVEX:
        out = _h2(p, s, eliminate)
    else:
        raise ValueError(f"no h indicator is defined for {p.model.value}")
    return out if out.ndim else float(out)


def _h_leading_sign(p: ParameterSet, eliminate: bool) -> float:
    if p.model is ModelId.SIR_TREATMENT:
        # (d k + beta) * (k d^2 - beta (eps + gamma)) / d times I^4
        return math.copysign(1.0, p.k * p.d ** 2 - p.beta * (p.epsilon + p.gamma))
    if eliminate:
        return math.copysign(1.0, p.A * p.C * (p.D - 1) - p.D ** 2)
    return 1.0


def h_negative_intervals(
    p: ParameterSet,
    eliminate: bool = True,
    s_max: float = 1e3,
    n: int = 1024,
    xtol: float = 1e-10,
) -> list[tuple[float, float]]:
    """Intervals of (0, s_max] where h < 0, from a geometric sign scan.

    The right end is reported as ``inf`` when h is still negative at ``s_max``
    and the leading power keeps it negative. With ``eliminate=True`` on the
    in-host model, pieces where the branch value of B is non-positive are
    dropped since they carry no admissible equilibrium.
    """
    grid = np.geomspace(s_max * 1e-9, s_max, n)
    if eliminate and p.model is ModelId.INHOST_CONVEX and s_max > 1:
        # the eliminated form has a pole at Y = 1; pin the grid on both sides
        grid = np.union1d(grid, [1 - 1e-9, 1 + 1e-9])
    vals = h_value(p, grid, eliminate)
    neg = vals < 0
    edges = []
    for i in np.nonzero(neg[:-1] != neg[1:])[0]:
        f = lambda s: h_value(p, s, eliminate)
        a, b = grid[i], grid[i + 1]
        fa, fb = f(a), f(b)
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb < 0:
            edges.append(brentq(f, a, b, xtol=xtol, rtol=1e-14))
        else:
            edges.append(0.5 * (a + b))
    bounds = [0.0, *edges, s_max]
    intervals = []
    starts_neg = bool(neg[0])
    for j in range(len(bounds) - 1):
        if (j % 2 == 0) == starts_neg:
            intervals.append([bounds[j], bounds[j + 1]])
    if intervals and intervals[-1][1] == s_max and _h_leading_sign(p, eliminate) < 0:
        intervals[-1][1] = math.inf

    if eliminate and p.model is ModelId.INHOST_CONVEX:
        kept = []
        for lo, hi in intervals:
            probe_hi = hi if math.isfinite(hi) else max(10 * lo, s_max)
            probe = np.geomspace(max(lo, 1e-12), probe_hi, 64)[1:-1]
            if np.any(branch_parameter(p, probe) > 0):
                kept.append([lo, hi])
        intervals = kept
    return [tuple(iv) for iv in intervals]


def h_indicator(p: ParameterSet, s: float, eliminate: bool = False):
    """Return ``(h(s), negativity intervals)``."""
    return h_value(p, s, eliminate), h_negative_intervals(p, eliminate=True)
