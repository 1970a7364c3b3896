"""
Normal-form coefficients at planar Hopf points and their classification.

With ``mu = p - p_H`` the radial normal form reads ``r' = d mu r + a r^3``.
``d`` is the speed at which the critical pair crosses the imaginary axis; it
is obtained by first-order eigenvalue perturbation along the equilibrium
branch. ``a`` is the first Lyapunov (cubic) coefficient computed in the
canonical frame ``x' = -w y + F, y' = w x + G`` built from the unit-norm
critical eigenvector, using the Guckenheimer-Holmes formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .equilibrium import infected_equilibria, turning_point
from .models import ParameterSet, jacobian, param_derivatives
from .odesim import IntegratorConfig, integrate
from .scan import BifurcationPoint, _with_param

__all__ = [
    "HopfData",
    "DegeneracyError",
    "transversality_d",
    "transversality_d_fd",
    "lyapunov_a",
    "classify_hopf",
    "hopf_data",
    "amplitude_estimate",
    "canonical_frame",
    "simulation_probe",
    "ProbeResult",
]

HOPF_CLASSES = {
    (True, True): ("a", "subcritical", "unstable"),
    (True, False): ("b", "supercritical", "stable"),
    (False, True): ("c", "subcritical", "unstable"),
    (False, False): ("d", "supercritical", "stable"),
}

COMPLEX_STEP = 1e-20


class DegeneracyError(ArithmeticError):
    """The Hopf point is degenerate for the requested quantity."""


@dataclass(frozen=True)
class HopfData:
    parameter: str
    param_value: float
    d: float
    a: float
    omega_c: float
    hopf_class: str
    criticality: str
    cycle_stability: str

    @property
    def mu_definition(self) -> str:
        return f"mu = {self.parameter} - {self.param_value!r}"


def _critical_pair(J: np.ndarray):
    w, vl, vr = scipy.linalg.eig(J, left=True, right=True)
    k = int(np.argmax(w.imag))
    if w[k].imag <= 0:
        raise DegeneracyError("no complex eigenvalue pair at the Hopf point")
    return w[k], vl[:, k], vr[:, k]


def _hessian_vec(p: ParameterSet, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Second derivative D^2 f(x)[u, v] by complex-step differentiation of the Jacobian."""
    return np.imag(jacobian(p, x + 1j * COMPLEX_STEP * u) @ v) / COMPLEX_STEP


def _third_vec(p, x, u, v, w, h) -> np.ndarray:
    """D^3 f(x)[u, v, w]: fourth-order central difference of the complex-step Hessian."""
    g = lambda s: _hessian_vec(p, x + s * w, u, v)
    return (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h)


def transversality_d(p: ParameterSet, hopf: BifurcationPoint) -> float:
    """d = dRe(lambda)/dmu along the equilibrium branch at a Hopf point.

    The equilibrium moves with the parameter: dx/dp = -J^{-1} df/dp, and the
    eigenvalue derivative is w^H (dJ/dp + D_x J[dx/dp]) v / (w^H v).
    """
    q = _with_param(p, hopf.param_value)
    x = np.asarray(hopf.state, dtype=float)
    J = jacobian(q, x)
    if np.linalg.cond(J) > 1e12:
        raise DegeneracyError("Jacobian is singular at the Hopf point (fold and Hopf coincide)")
    lam, wl, vr = _critical_pair(J)
    df, dJ = param_derivatives(q, x)
    dx = -np.linalg.solve(J, df)
    dJ_state = np.imag(jacobian(q, x + 1j * COMPLEX_STEP * dx)) / COMPLEX_STEP
    dlam = np.conj(wl) @ ((dJ + dJ_state) @ vr) / (np.conj(wl) @ vr)
    return float(dlam.real)


def _critical_real_part(q: ParameterSet, x: np.ndarray) -> float:
    w = np.linalg.eigvals(jacobian(q, x))
    return float(w[np.argmax(w.imag)].real)


def transversality_d_fd(p: ParameterSet, hopf: BifurcationPoint, step: float | None = None) -> float:
    """Central-difference estimate of d, following the same branch as the Hopf point.

    The default step is 1e-5 * max(1, |p_H|), shrunk to 1e-3 times the distance
    to the fold when the fold is closer.
    """
    pH = hopf.param_value
    h = 1e-5 * max(1.0, abs(pH)) if step is None else step
    tp = turning_point(_with_param(p, pH))
    if tp.exists and math.isfinite(tp.param_value) and tp.param_value != pH:
        h = min(h, 1e-3 * abs(pH - tp.param_value))
    idx = p.model.infected_index
    s_H = hopf.state[idx]
    vals = []
    for sign in (1, -1):
        q = _with_param(p, pH + sign * h)
        eqs = infected_equilibria(q)
        if not eqs:
            raise DegeneracyError(f"branch vanishes within {h:g} of the Hopf point")
        e = min(eqs, key=lambda e: abs(e.state[idx] - s_H))
        vals.append(_critical_real_part(q, e.state))
    return (vals[0] - vals[1]) / (2 * h)


def canonical_frame(p: ParameterSet, hopf: BifurcationPoint):
    """Return (x_H, P, omega) with P^{-1} J P = [[0, -omega], [omega, 0]].

    P = [Re q, -Im q] for the unit-norm eigenvector q of i*omega.
    """
    q = _with_param(p, hopf.param_value)
    x = np.asarray(hopf.state, dtype=float)
    J = jacobian(q, x)
    if J.shape != (2, 2):
        raise ValueError("the canonical frame is only built for planar systems")
    w, V = np.linalg.eig(J)
    k = int(np.argmax(w.imag))
    vec = V[:, k] / np.linalg.norm(V[:, k])
    P = np.column_stack([vec.real, -vec.imag])
    return x, P, float(w[k].imag)


def lyapunov_a(p: ParameterSet, hopf: BifurcationPoint, step: float = 1e-3) -> float:
    """Cubic normal-form coefficient ``a`` at a planar Hopf point.

    Second derivatives are exact to rounding (complex step); third derivatives
    use a central difference with step ``step * max(1, |x|_inf)``.
    """
    q = _with_param(p, hopf.param_value)
    x, P, omega = canonical_frame(p, hopf)
    if omega <= 0:
        raise DegeneracyError("non-positive Hopf frequency")
    Pinv = np.linalg.inv(P)
    e1, e2 = P[:, 0], P[:, 1]
    h = step * max(1.0, float(np.max(np.abs(x))))

    B = lambda u, v: Pinv @ _hessian_vec(q, x, u, v)
    C = lambda u, v, w: Pinv @ _third_vec(q, x, u, v, w, h)
    Bxx, Bxy, Byy = B(e1, e1), B(e1, e2), B(e2, e2)
    fxx, gxx = Bxx
    fxy, gxy = Bxy
    fyy, gyy = Byy
    fxxx = C(e1, e1, e1)[0]
    fxyy = C(e2, e2, e1)[0]
    gxxy = C(e1, e1, e2)[1]
    gyyy = C(e2, e2, e2)[1]
    a = (fxxx + fxyy + gxxy + gyyy) / 16 + (
        fxy * (fxx + fyy) - gxy * (gxx + gyy) - fxx * gxx + fyy * gyy
    ) / (16 * omega)
    if abs(a) < 1e-14:
        raise DegeneracyError(f"cubic coefficient vanishes (a={a:.3e}); degenerate Hopf point")
    return float(a)


def classify_hopf(d: float, a: float) -> tuple[str, str, str]:
    """Class letter (a-d), criticality and stability of the bifurcating cycle."""
    if d == 0 or a == 0 or not (math.isfinite(d) and math.isfinite(a)):
        raise DegeneracyError(f"classification needs non-zero finite d and a, got d={d}, a={a}")
    return HOPF_CLASSES[(d > 0, a > 0)]


def hopf_data(p: ParameterSet, hopf: BifurcationPoint, step: float = 1e-3) -> HopfData:
    if hopf.kind != "hopf":
        raise ValueError(f"expected a hopf point, got {hopf.kind}")
    d = transversality_d(p, hopf)
    a = lyapunov_a(p, hopf, step)
    cls, crit, stab = classify_hopf(d, a)
    return HopfData(p.model.bifurcation_parameter, hopf.param_value, d, a, float(hopf.omega_c), cls, crit, stab)


def amplitude_estimate(h: HopfData, mu: float) -> float | None:
    """Normal-form cycle radius sqrt(-d mu / a), or None on the side without a cycle."""
    r2 = -h.d * mu / h.a
    return math.sqrt(r2) if r2 > 0 else None


# --- simulation probe -------------------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    criticality: str  # supercritical | subcritical | undecided
    unstable_side: int  # sign of mu on the unstable side
    amplitudes: tuple[float, ...]
    exponent: float
    stable_side_decays: bool


def _branch_state(p: ParameterSet, hopf: BifurcationPoint, value: float) -> np.ndarray:
    q = _with_param(p, value)
    idx = p.model.infected_index
    eqs = infected_equilibria(q)
    if not eqs:
        raise DegeneracyError(f"no infected equilibrium at {p.model.bifurcation_parameter}={value}")
    return min(eqs, key=lambda e: abs(e.state[idx] - hopf.state[idx])).state


def _terminal_deviation(p, ic, xe, t_end, idx, cfg):
    traj = integrate(p, ic, IntegratorConfig(rtol=cfg.rtol, atol=cfg.atol, t_end=t_end, sample_dt=cfg.sample_dt))
    tail = traj.x[traj.t >= 0.8 * t_end, idx]
    return float(np.max(np.abs(tail - xe[idx])))


def simulation_probe(
    p: ParameterSet,
    hopf: BifurcationPoint,
    eps: tuple[float, float] = (0.01, 0.05),
    cfg: IntegratorConfig | None = None,
) -> ProbeResult:
    """Decide criticality by direct simulation near a Hopf point.

    On the unstable side (given by the sign of d) two runs at relative
    offsets ``eps`` start from a 1e-2 relative perturbation of the
    equilibrium; the terminal oscillation amplitude of the infected component
    should grow like sqrt(mu) for a supercritical point and jump to a large
    value for a subcritical one. On the stable side a 1e-3 perturbation must
    decay for a supercritical point.
    """
    cfg = cfg or IntegratorConfig()
    d = transversality_d(p, hopf)
    side = 1 if d > 0 else -1
    pH = hopf.param_value
    idx = p.model.infected_index
    omega = float(hopf.omega_c)
    amps = []
    for e in eps:
        mu = side * e * abs(pH)
        q = _with_param(p, pH + mu)
        xe = _branch_state(p, hopf, pH + mu)
        growth = max(abs(d * mu), 1e-12)
        t_end = 12.0 / growth + 20 * 2 * math.pi / omega
        ic = xe * (1 + 1e-2) + 1e-2 * (np.abs(xe) == 0)
        amps.append(_terminal_deviation(q, ic, xe, t_end, idx, cfg))

    mu = -side * eps[0] * abs(pH)
    q = _with_param(p, pH + mu)
    xe = _branch_state(p, hopf, pH + mu)
    decay = max(abs(d * mu), 1e-12)
    t_end = 12.0 / decay + 20 * 2 * math.pi / omega
    ic = xe * (1 + 1e-3) + 1e-3 * (np.abs(xe) == 0)
    end_dev = _terminal_deviation(q, ic, xe, t_end, idx, cfg)
    decays = bool(end_dev < 1e-3 * max(abs(xe[idx]), 1e-12))

    if amps[0] <= 0 or amps[1] <= 0:
        return ProbeResult("undecided", side, tuple(amps), math.nan, decays)
    exponent = math.log(amps[1] / amps[0]) / math.log(eps[1] / eps[0])
    if 0.35 <= exponent <= 0.75 and decays:
        crit = "supercritical"
    elif exponent < 0.25 or not decays:
        crit = "subcritical"
    else:
        crit = "undecided"
    return ProbeResult(crit, side, tuple(amps), exponent, decays)
