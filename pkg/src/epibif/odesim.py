"""
Trajectory integration and categorical behaviour classification.

The integrator is the Dormand-Prince 5(4) pair with Hairer's continuous
extension for dense sampling. It is written with scalar arithmetic on tuples
because the systems are tiny; this is an order of magnitude faster than
going through numpy for every stage.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .equilibrium import EquilibriumPoint, all_equilibria
from .models import ModelId, ParameterSet, vector_field

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "AttractorVerdict",
    "RecurrenceMetrics",
    "BistabilityResult",
    "IntegrationError",
    "integrate",
    "detect_attractor",
    "recurrence_metrics",
    "bistability_probe",
    "simulate_and_classify",
    "default_t_end",
]

# Dormand-Prince tableau
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# dense output (Hairer, contd5)
D1, D3, D4 = -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072
D5, D6, D7 = 701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423


class IntegrationError(ArithmeticError):
    """Integration aborted; ``t`` is the time reached."""

    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(f"{message} at t={t:.6g}")


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = math.inf
    t_end: float | None = None  # None: model default, see default_t_end
    sample_dt: float = 0.1
    max_steps: int = 20_000_000

    def __post_init__(self):
        for name in ("rtol", "atol", "max_step", "sample_dt"):
            v = getattr(self, name)
            if not (v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.t_end is not None and not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive and finite, got {self.t_end}")

    def tightened(self, factor: float = 10.0) -> "IntegratorConfig":
        return replace(self, rtol=self.rtol / factor, atol=self.atol / factor)


def default_t_end(model: ModelId) -> float:
    return 2000.0 if model in (ModelId.AUTOIMMUNE_2D, ModelId.AUTOIMMUNE_3D) else 5000.0


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (samples, dimension)
    model: ModelId | None = None
    n_accepted: int = 0
    n_rejected: int = 0

    def component(self, i: int) -> np.ndarray:
        return self.x[:, i]

    def window(self, fraction: float) -> "Trajectory":
        """Trailing part covering ``fraction`` of the time span."""
        t0 = self.t[-1] - fraction * (self.t[-1] - self.t[0])
        m = self.t >= t0
        return Trajectory(self.t[m], self.x[m], self.model, self.n_accepted, self.n_rejected)


def _initial_step(f, y, f0, rtol, atol, max_step):
    n = len(y)
    sc = [atol + rtol * abs(v) for v in y]
    d0 = math.sqrt(sum((y[i] / sc[i]) ** 2 for i in range(n)) / n)
    d1 = math.sqrt(sum((f0[i] / sc[i]) ** 2 for i in range(n)) / n)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = [y[i] + h0 * f0[i] for i in range(n)]
    f1 = f(y1)
    d2 = math.sqrt(sum(((f1[i] - f0[i]) / sc[i]) ** 2 for i in range(n)) / n) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


def integrate(p: ParameterSet, ic: Sequence[float], cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate from ``ic`` over [0, t_end], sampling every ``cfg.sample_dt``.

    The final sample is exactly at ``t_end``. Raises IntegrationError on
    step-size underflow, a non-finite state or exhaustion of ``max_steps``.
    """
    cfg = cfg or IntegratorConfig()
    t_end = cfg.t_end if cfg.t_end is not None else default_t_end(p.model)
    y = tuple(float(v) for v in ic)
    n = len(y)
    if n != p.model.dimension:
        raise ValueError(f"{p.model.value} expects an initial condition of length {p.model.dimension}")
    if not all(math.isfinite(v) for v in y):
        raise ValueError(f"initial condition must be finite, got {ic}")
    f = vector_field(p)
    rtol, atol, max_step = cfg.rtol, cfg.atol, cfg.max_step
    rng = range(n)

    n_samples = int(math.floor(t_end / cfg.sample_dt + 1e-9)) + 1
    times = [k * cfg.sample_dt for k in range(n_samples)]
    if t_end - times[-1] > 1e-9 * t_end:
        times.append(t_end)
    else:
        times[-1] = t_end
    out = [y]
    next_k = 1

    t = 0.0
    k1 = f(y)
    h = _initial_step(f, y, k1, rtol, atol, max_step)
    accepted = rejected = 0
    last_rejected = False
    while t < t_end:
        if accepted + rejected >= cfg.max_steps:
            raise IntegrationError("step budget exhausted", t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t)
        if t + h > t_end:
            h = t_end - t
        k2 = f(tuple(y[i] + h * A21 * k1[i] for i in rng))
        k3 = f(tuple(y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in rng))
        k4 = f(tuple(y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in rng))
        k5 = f(tuple(y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in rng))
        k6 = f(tuple(y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]) for i in rng))
        yn = tuple(y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]) for i in rng)
        k7 = f(yn)
        err = 0.0
        for i in rng:
            sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
            ei = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) / sc
            err += ei * ei
        err = math.sqrt(err / n)
        if not math.isfinite(err):
            if h < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError("non-finite state", t)
            h *= 0.2
            rejected += 1
            last_rejected = True
            continue
        if err <= 1.0:
            t_new = t + h if t + h < t_end else t_end
            # dense output for the samples inside (t, t_new]
            if next_k < len(times) and times[next_k] <= t_new:
                dy = [yn[i] - y[i] for i in rng]
                bspl = [h * k1[i] - dy[i] for i in rng]
                r4 = [dy[i] - h * k7[i] - bspl[i] for i in rng]
                r5 = [h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]) for i in rng]
                while next_k < len(times) and times[next_k] <= t_new:
                    ts = times[next_k]
                    if ts == t_new:
                        out.append(yn)
                    else:
                        th = (ts - t) / h
                        th1 = 1.0 - th
                        out.append(
                            tuple(y[i] + th * (dy[i] + th1 * (bspl[i] + th * (r4[i] + th1 * r5[i]))) for i in rng)
                        )
                    next_k += 1
            t, y, k1 = t_new, yn, k7
            accepted += 1
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            if last_rejected:
                fac = min(fac, 1.0)
            h = min(h * fac, max_step)
            last_rejected = False
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            rejected += 1
            last_rejected = True
    x = np.array(out[: len(times)], dtype=float)
    return Trajectory(np.array(times), x, p.model, accepted, rejected)


# --- classification -------------------------------------------------------------


@dataclass(frozen=True)
class RecurrenceMetrics:
    episodes: int
    quiescent_fraction: float

    def __iter__(self):
        return iter((self.episodes, self.quiescent_fraction))


@dataclass(frozen=True)
class AttractorVerdict:
    kind: str  # equilibrium | limit_cycle | recurrent | undecided
    equilibrium_index: int | None = None
    period: float | None = None
    amplitude: float | None = None
    episodes: int | None = None
    quiescent_fraction: float | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def same_attractor(self, other: "AttractorVerdict") -> bool:
        if self.kind != other.kind:
            return False
        if self.kind == "equilibrium":
            return self.equilibrium_index == other.equilibrium_index
        return True

    def label(self) -> str:
        if self.kind == "equilibrium":
            return f"equilibrium({self.equilibrium_index})"
        return self.kind


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index runs where ``mask`` is true."""
    m = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(m)
    return list(zip(np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]))


def _run_duration(t: np.ndarray, a: int, b: int) -> float:
    return float(t[min(b, len(t) - 1)] - t[a])


def recurrence_metrics(
    traj: Trajectory,
    theta_hi: float | None = None,
    theta_lo: float | None = None,
    min_quiescent_duration: float | None = None,
    component: int | None = None,
    window: float = 0.5,
    atol: float = 1e-10,
) -> RecurrenceMetrics:
    """Episode count and quiescent fraction of the infected component.

    Episodes are maximal runs above ``theta_hi``. Quiescent time is the total
    length of runs below ``theta_lo`` that last longer than
    ``min_quiescent_duration``, as a fraction of the analysed window.
    Defaults: thresholds at 0.5 and 0.1 of the window maximum, and a minimum
    quiescent duration of twice the mean episode duration.
    """
    if component is None:
        component = traj.model.infected_index if traj.model is not None else 1
    w = traj.window(window) if window < 1 else traj
    t, y = w.t, w.x[:, component]
    span = float(t[-1] - t[0])
    y_max = float(np.max(y))
    if y_max < 10 * atol or float(np.ptp(y)) < 10 * atol * (1 + abs(y_max)) or span <= 0:
        return RecurrenceMetrics(0, 1.0)
    hi = 0.5 * y_max if theta_hi is None else theta_hi
    lo = 0.1 * y_max if theta_lo is None else theta_lo
    if not 0 < lo < hi:
        raise ValueError(f"thresholds must satisfy 0 < theta_lo < theta_hi, got {lo}, {hi}")
    episodes = _runs(y > hi)
    if min_quiescent_duration is None:
        durations = [_run_duration(t, a, b) for a, b in episodes]
        min_quiescent_duration = 2 * float(np.mean(durations)) if durations else 0.0
    quiet = 0.0
    for a, b in _runs(y < lo):
        dur = _run_duration(t, a, b)
        if dur > min_quiescent_duration:
            quiet += dur
    return RecurrenceMetrics(len(episodes), min(1.0, quiet / span))


def _peaks(t: np.ndarray, y: np.ndarray, level: float) -> tuple[np.ndarray, np.ndarray]:
    i = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] > level))[0] + 1
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(den != 0, 0.5 * (y0 - y2) / den, 0.0)
    dt = t[i + 1] - t[i]
    return t[i] + off * dt, y1 - 0.25 * (y0 - y2) * off


def _equilibrium_states(equilibria) -> list[np.ndarray]:
    return [np.asarray(e.state if isinstance(e, EquilibriumPoint) else e, dtype=float) for e in equilibria]


def detect_attractor(
    traj: Trajectory,
    equilibria: Sequence = (),
    component: int | None = None,
    eq_rtol: float = 1e-5,
    window: float = 0.5,
    min_episodes: int = 3,
    min_quiescent: float = 0.5,
    max_jitter: float = 0.02,
    max_drift: float = 0.05,
    atol: float = 1e-10,
) -> AttractorVerdict:
    """Categorise the long-time behaviour of ``traj``.

    Checked in order: convergence to a listed equilibrium over the last 10% of
    samples, recurrence over the trailing ``window`` of the run, then a
    periodic infected component (at least 3 peaks, period jitter below
    ``max_jitter``, peak heights varying by less than ``max_drift`` of the
    peak-to-peak range). Anything else is undecided.
    """
    if component is None:
        component = traj.model.infected_index if traj.model is not None else 1
    tail = traj.x[-max(2, len(traj.t) // 10):]
    for k, xe in enumerate(_equilibrium_states(equilibria)):
        dev = float(np.max(np.abs(tail - xe)))
        if dev <= eq_rtol * (1 + float(np.max(np.abs(xe)))):
            return AttractorVerdict("equilibrium", equilibrium_index=k, diagnostics={"deviation": dev})

    rm = recurrence_metrics(traj, component=component, window=window, atol=atol)
    diag = {"episodes": rm.episodes, "quiescent_fraction": rm.quiescent_fraction}
    if rm.episodes >= min_episodes and rm.quiescent_fraction >= min_quiescent:
        return AttractorVerdict(
            "recurrent", episodes=rm.episodes, quiescent_fraction=rm.quiescent_fraction, diagnostics=diag
        )

    w = traj.window(window)
    t, y = w.t, w.x[:, component]
    y_max, y_min = float(np.max(y)), float(np.min(y))
    amp = 0.5 * (y_max - y_min)
    if amp > 1e3 * atol * (1 + abs(y_max)):
        pt, pv = _peaks(t, y, 0.5 * (y_max + y_min))
        if len(pt) >= 3:
            periods = np.diff(pt)
            jitter = float(np.std(periods) / np.mean(periods))
            # a slowly decaying or growing focus has regular periods but drifting peaks
            drift = float((np.max(pv) - np.min(pv)) / (y_max - y_min))
            diag["jitter"] = jitter
            diag["peak_drift"] = drift
            if jitter < max_jitter and drift < max_drift:
                return AttractorVerdict(
                    "limit_cycle",
                    period=float(np.mean(periods)),
                    amplitude=amp,
                    episodes=rm.episodes,
                    quiescent_fraction=rm.quiescent_fraction,
                    diagnostics=diag,
                )
    return AttractorVerdict("undecided", episodes=rm.episodes, quiescent_fraction=rm.quiescent_fraction, diagnostics=diag)


def simulate_and_classify(
    p: ParameterSet, ic: Sequence[float], cfg: IntegratorConfig | None = None
) -> tuple[Trajectory, AttractorVerdict]:
    traj = integrate(p, ic, cfg)
    return traj, detect_attractor(traj, all_equilibria(p))


def _verdict_only(args) -> AttractorVerdict:
    p, ic, cfg = args
    return simulate_and_classify(p, ic, cfg)[1]


@dataclass(frozen=True)
class BistabilityResult:
    verdicts: tuple[tuple[tuple[float, ...], AttractorVerdict], ...]
    bistable: bool | None  # None: inconclusive (some verdict undecided)


def bistability_probe(
    p: ParameterSet,
    ics: Sequence[Sequence[float]],
    cfg: IntegratorConfig | None = None,
    workers: int = 1,
) -> BistabilityResult:
    """Classify the attractor reached from each initial condition.

    ``bistable`` is True when two initial conditions reach different attractor
    kinds or different equilibria, and None when any verdict is undecided.
    """
    ics = [tuple(float(v) for v in ic) for ic in ics]
    jobs = [(p, ic, cfg) for ic in ics]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            verdicts = list(ex.map(_verdict_only, jobs))
    else:
        verdicts = [_verdict_only(j) for j in jobs]
    pairs = tuple(zip(ics, verdicts))
    if len(ics) < 2:
        return BistabilityResult(pairs, False)
    if any(v.kind == "undecided" for v in verdicts):
        return BistabilityResult(pairs, None)
    distinct = any(not a.same_attractor(b) for i, a in enumerate(verdicts) for b in verdicts[i + 1:])
    return BistabilityResult(pairs, distinct)
