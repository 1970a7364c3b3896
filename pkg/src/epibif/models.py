"""
Vector fields of the five disease models.

Each model is described by a frozen parameter dataclass. The dataclass knows
its :class:`ModelId`, so the evaluation functions take ``(params, state)``:

====================  ======================  =========================
ModelId               state                   bifurcation parameter
====================  ======================  =========================
SIR_CONCAVE           (S, I)                  Lambda
SIR_TREATMENT         (S, I)                  Lambda
INHOST_CONVEX         (X, Y)                  B
AUTOIMMUNE_2D         (A, R_n)                lambda_E
AUTOIMMUNE_3D         (A, R_n, R_d)           lambda_E
====================  ======================  =========================

States may have negative components (branches below the axis are analysed
too); :func:`feasible` is the separate positivity predicate. All right-hand
sides are written with plain arithmetic so they accept complex states, which
the normal-form code uses for complex-step differentiation.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ModelId",
    "ParameterError",
    "DomainError",
    "SIRConcaveParams",
    "SIRTreatmentParams",
    "InHostParams",
    "Autoimmune2DParams",
    "Autoimmune3DParams",
    "ParameterSet",
    "make_params",
    "rhs",
    "jacobian",
    "vector_field",
    "param_derivatives",
    "compound_params",
    "feasible",
]


class ModelId(enum.Enum):
    SIR_CONCAVE = "SIR_CONCAVE"
    SIR_TREATMENT = "SIR_TREATMENT"
    INHOST_CONVEX = "INHOST_CONVEX"
    AUTOIMMUNE_2D = "AUTOIMMUNE_2D"
    AUTOIMMUNE_3D = "AUTOIMMUNE_3D"

    @property
    def dimension(self) -> int:
        return 3 if self is ModelId.AUTOIMMUNE_3D else 2

    @property
    def state_names(self) -> tuple[str, ...]:
        return _STATE_NAMES[self]

    @property
    def infected_index(self) -> int:
        """Index of the infected (disease-carrying) state component."""
        return 0 if self in (ModelId.AUTOIMMUNE_2D, ModelId.AUTOIMMUNE_3D) else 1

    @property
    def bifurcation_parameter(self) -> str:
        return _BIF_PARAM[self]


_STATE_NAMES = {
    ModelId.SIR_CONCAVE: ("S", "I"),
    ModelId.SIR_TREATMENT: ("S", "I"),
    ModelId.INHOST_CONVEX: ("X", "Y"),
    ModelId.AUTOIMMUNE_2D: ("A", "R_n"),
    ModelId.AUTOIMMUNE_3D: ("A", "R_n", "R_d"),
}

_BIF_PARAM = {
    ModelId.SIR_CONCAVE: "Lambda",
    ModelId.SIR_TREATMENT: "Lambda",
    ModelId.INHOST_CONVEX: "B",
    ModelId.AUTOIMMUNE_2D: "lambda_E",
    ModelId.AUTOIMMUNE_3D: "lambda_E",
}


class ParameterError(ValueError):
    """A parameter value is missing, non-finite or not strictly positive."""


class DomainError(ArithmeticError):
    """The state hits a pole of the vector field (a vanishing denominator)."""

    def __init__(self, denominator: str, state):
        self.denominator = denominator
        self.state = state
        super().__init__(f"singular denominator {denominator} at state {list(state)}")


@dataclass(frozen=True)
class _Params:
    model: enum.Enum = dataclasses.field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if not f.init:
                continue
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ParameterError(f"{f.name} must be a real number, got {value!r}")
            if not math.isfinite(value) or value <= 0:
                raise ParameterError(f"{f.name} must be finite and strictly positive, got {value!r}")
            object.__setattr__(self, f.name, float(value))

    def replace(self, **changes) -> "_Params":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.init}

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls) if f.init)


@dataclass(frozen=True)
class SIRConcaveParams(_Params):
    """SIR model with saturating incidence beta*S*I/(1+k*I)."""

    Lambda: float
    beta: float
    k: float
    d: float
    gamma: float
    epsilon: float

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "model", ModelId.SIR_CONCAVE)


@dataclass(frozen=True)
class SIRTreatmentParams(_Params):
    """SIR model with saturating incidence and saturating treatment alpha*I/(omega+I)."""

    Lambda: float
    beta: float
    k: float
    d: float
    gamma: float
    epsilon: float
    alpha: float
    omega: float

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "model", ModelId.SIR_TREATMENT)


@dataclass(frozen=True)
class InHostParams(_Params):
    """Rescaled in-host model with convex incidence (B + A*Y/(Y+C))*X*Y."""

    A: float
    B: float
    C: float
    D: float

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "model", ModelId.INHOST_CONVEX)


@dataclass(frozen=True)
class Autoimmune2DParams(_Params):
    """Quasi-steady-state reduction of the pAPC / regulatory T cell model."""

    f: float
    v_tilde: float
    sigma1: float
    b1: float
    mu_A: float
    pi1: float
    beta: float
    mu_n: float
    mu_E: float
    gamma: float
    mu_G: float
    lambda_E: float

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "model", ModelId.AUTOIMMUNE_2D)


@dataclass(frozen=True)
class Autoimmune3DParams(_Params):
    """Reduced autoimmune model with terminally differentiated T_Reg cells R_d."""

    f: float
    v_tilde: float
    sigma1: float
    b1: float
    mu_A: float
    pi1: float
    beta: float
    mu_n: float
    mu_E: float
    gamma: float
    mu_G: float
    lambda_E: float
    mu_d: float
    c: float
    d: float
    xi: float

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "model", ModelId.AUTOIMMUNE_3D)


ParameterSet = (
    SIRConcaveParams | SIRTreatmentParams | InHostParams | Autoimmune2DParams | Autoimmune3DParams
)

PARAM_CLASSES: dict[ModelId, type] = {
    ModelId.SIR_CONCAVE: SIRConcaveParams,
    ModelId.SIR_TREATMENT: SIRTreatmentParams,
    ModelId.INHOST_CONVEX: InHostParams,
    ModelId.AUTOIMMUNE_2D: Autoimmune2DParams,
    ModelId.AUTOIMMUNE_3D: Autoimmune3DParams,
}


def make_params(model: ModelId | str, **values) -> ParameterSet:
    """Build a validated parameter set; unknown or missing names raise ParameterError."""
    model = ModelId(model)
    cls = PARAM_CLASSES[model]
    names = set(cls.field_names())
    unknown = sorted(set(values) - names)
    if unknown:
        raise ParameterError(f"unknown parameter(s) for {model.value}: {', '.join(unknown)}")
    missing = [n for n in cls.field_names() if n not in values]
    if missing:
        raise ParameterError(f"missing parameter(s) for {model.value}: {', '.join(missing)}")
    return cls(**values)


def compound_params(p: Autoimmune2DParams | Autoimmune3DParams) -> tuple[float, float]:
    """Net pAPC growth rate ``a`` and Treg activation ``b`` of the reduced autoimmune models."""
    if getattr(p, "model", None) not in (ModelId.AUTOIMMUNE_2D, ModelId.AUTOIMMUNE_3D):
        raise TypeError(f"compound parameters are defined for the autoimmune models, not {p.model.value}")
    a = p.f * p.v_tilde * p.gamma * p.lambda_E / (p.mu_E * (p.v_tilde + p.mu_G)) - p.b1 - p.mu_A
    b = p.pi1 * p.lambda_E / p.mu_E
    return a, b


# --- per-model kernels -------------------------------------------------------
# Each kernel factory binds parameters to locals and returns f(x) -> tuple.
# The same closures drive the integrator, so they avoid numpy on purpose.


def _sir_field(p, treatment: bool):
    Lam, beta, k, d = p.Lambda, p.beta, p.k, p.d
    m = p.d + p.gamma + p.epsilon
    alpha = p.alpha if treatment else 0.0
    omega = p.omega if treatment else 1.0

    def f(x):
        S, I = x[0], x[1]
        inc = beta * S * I / (1 + k * I)
        dI = inc - m * I
        if treatment:
            dI = dI - alpha * I / (omega + I)
        return (Lam - inc - d * S, dI)

    return f


def _sir_jac(p, x, treatment: bool):
    S, I = x[0], x[1]
    beta, k, d = p.beta, p.k, p.d
    m = p.d + p.gamma + p.epsilon
    q = 1 + k * I
    inc_S = beta * I / q
    inc_I = beta * S / (q * q)
    j22 = inc_I - m
    if treatment:
        j22 = j22 - p.alpha * p.omega / (p.omega + I) ** 2
    return [[-inc_S - d, -inc_I], [inc_S, j22]]


def _inhost_field(p):
    A, B, C, D = p.A, p.B, p.C, p.D

    def f(x):
        X, Y = x[0], x[1]
        inc = (B + A * Y / (Y + C)) * X * Y
        return (1 - D * X - inc, inc - Y)

    return f


def _inhost_jac(p, x):
    X, Y = x[0], x[1]
    A, B, C, D = p.A, p.B, p.C, p.D
    phi = B + A * Y / (Y + C)
    dphi = A * C / (Y + C) ** 2
    dinc_dY = X * (phi + Y * dphi)
    return [[-D - phi * Y, -dinc_dY], [phi * Y, dinc_dY - 1]]


def _auto2_field(p):
    a, b = compound_params(p)
    sigma1, beta, mu_n = p.sigma1, p.beta, p.mu_n

    def f(x):
        A, Rn = x[0], x[1]
        return (a * A - sigma1 * Rn * A, (b * A + beta) * A - mu_n * Rn)

    return f


def _auto2_jac(p, x):
    A, Rn = x[0], x[1]
    a, b = compound_params(p)
    return [[a - p.sigma1 * Rn, -p.sigma1 * A], [2 * b * A + p.beta, -p.mu_n]]


def _auto3_field(p):
    a, b = compound_params(p)
    sigma1, beta, dd = p.sigma1, p.beta, p.d
    loss_n = p.mu_n + p.xi
    gain_d = p.c * p.xi
    mu_d = p.mu_d

    def f(x):
        A, Rn, Rd = x[0], x[1], x[2]
        return (
            a * A - sigma1 * (Rn + dd * Rd) * A,
            (b * A + beta) * A - loss_n * Rn,
            gain_d * Rn - mu_d * Rd,
        )

    return f


def _auto3_jac(p, x):
    A, Rn, Rd = x[0], x[1], x[2]
    a, b = compound_params(p)
    s = p.sigma1
    return [
        [a - s * (Rn + p.d * Rd), -s * A, -s * p.d * A],
        [2 * b * A + p.beta, -(p.mu_n + p.xi), 0.0],
        [0.0, p.c * p.xi, -p.mu_d],
    ]


def jacobian_entries(p, x):
    """Unchecked Jacobian as nested lists.

    ``p`` only needs the parameter attributes and ``model``; attributes and
    state components may be numpy arrays, giving an elementwise evaluation.
    """
    model = p.model
    if model is ModelId.SIR_CONCAVE:
        return _sir_jac(p, x, treatment=False)
    if model is ModelId.SIR_TREATMENT:
        return _sir_jac(p, x, treatment=True)
    if model is ModelId.INHOST_CONVEX:
        return _inhost_jac(p, x)
    if model is ModelId.AUTOIMMUNE_2D:
        return _auto2_jac(p, x)
    return _auto3_jac(p, x)


def _denominators(p, x) -> list[tuple[str, complex]]:
    model = p.model
    if model is ModelId.SIR_CONCAVE:
        return [("1+k*I", 1 + p.k * x[1])]
    if model is ModelId.SIR_TREATMENT:
        return [("1+k*I", 1 + p.k * x[1]), ("omega+I", p.omega + x[1])]
    if model is ModelId.INHOST_CONVEX:
        return [("Y+C", x[1] + p.C)]
    return []


def vector_field(p: ParameterSet) -> Callable[[Sequence], tuple]:
    """Unchecked fast kernel ``f(x) -> tuple`` used by the integrator."""
    model = p.model
    if model is ModelId.SIR_CONCAVE:
        return _sir_field(p, treatment=False)
    if model is ModelId.SIR_TREATMENT:
        return _sir_field(p, treatment=True)
    if model is ModelId.INHOST_CONVEX:
        return _inhost_field(p)
    if model is ModelId.AUTOIMMUNE_2D:
        return _auto2_field(p)
    return _auto3_field(p)


def _as_state(p, x):
    x = np.asarray(x)
    if x.shape != (p.model.dimension,):
        raise ValueError(f"{p.model.value} expects a state of length {p.model.dimension}, got shape {x.shape}")
    # python scalars keep float division semantics and let complex states through
    return [complex(v) if np.iscomplexobj(x) else float(v) for v in x]


def _check_poles(p, xs):
    for name, value in _denominators(p, xs):
        if value == 0:
            raise DomainError(name, xs)


def rhs(p: ParameterSet, x) -> np.ndarray:
    """Time derivative of the state; raises DomainError at a pole."""
    xs = _as_state(p, x)
    _check_poles(p, xs)
    out = np.array(vector_field(p)(xs))
    if not np.all(np.isfinite(out)):
        name = min(_denominators(p, xs), key=lambda nv: abs(nv[1]), default=("<none>", 0))[0]
        raise DomainError(name, xs)
    return out


def jacobian(p: ParameterSet, x) -> np.ndarray:
    """Analytic Jacobian of :func:`rhs` with respect to the state."""
    xs = _as_state(p, x)
    _check_poles(p, xs)
    J = np.array(jacobian_entries(p, xs))
    if not np.all(np.isfinite(J)):
        name = min(_denominators(p, xs), key=lambda nv: abs(nv[1]), default=("<none>", 0))[0]
        raise DomainError(name, xs)
    return J


def param_derivatives(p: ParameterSet, x) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of rhs and jacobian with respect to the bifurcation parameter.

    Returns ``(df/dp, dJ/dp)`` at fixed state.
    """
    xs = _as_state(p, x)
    _check_poles(p, xs)
    model = p.model
    n = model.dimension
    df = np.zeros(n, dtype=complex if isinstance(xs[0], complex) else float)
    dJ = np.zeros((n, n), dtype=df.dtype)
    if model in (ModelId.SIR_CONCAVE, ModelId.SIR_TREATMENT):
        df[0] = 1.0
    elif model is ModelId.INHOST_CONVEX:
        X, Y = xs
        df[:] = (-X * Y, X * Y)
        dJ[:] = [[-Y, -X], [Y, X]]
    else:
        A = xs[0]
        da = p.f * p.v_tilde * p.gamma / (p.mu_E * (p.v_tilde + p.mu_G))
        db = p.pi1 / p.mu_E
        df[0] = da * A
        df[1] = db * A * A
        dJ[0, 0] = da
        dJ[1, 0] = 2 * db * A
    return df, dJ


def feasible(x, tol: float = 0.0) -> bool:
    """True when every state component is non-negative (down to ``-tol``)."""
    return bool(np.all(np.real(np.asarray(x)) >= -tol))
