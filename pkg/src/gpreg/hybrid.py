"""Generic simulator for hybrid systems with a scalar event surface.

A :class:`HybridSystem` flows while its event value is negative and jumps
once it reaches zero from below (the flow and jump sets overlap on the zero
level set; the jump wins the tie so runs are deterministic).  Continuous
evolution uses an adaptive embedded Dormand-Prince 5(4) pair; event times
are localized by bisection on a cubic Hermite interpolant of the accepting
step, to within ``event_tol`` seconds.  Solutions are stored densely as
:class:`HybridArc` objects: one time-stamped trajectory per flow interval,
indexed by the jump counter, plus a per-jump log.

Systems carry an opaque "discrete" component alongside the continuous state
vector: it is constant during flow and replaced by the jump map (the
regulator keeps its sample buffer and fitted posterior there).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class IntegrationError(RuntimeError):
    """Flow integration failed (step-size underflow or non-finite values)."""

    def __init__(self, message, t=None, y=None):
        super().__init__(message)
        self.t = t
        self.y = y


class JumpContractError(RuntimeError):
    """A jump was requested at a state outside the jump set."""


@dataclass
class HybridSystem:
    """Flow/jump/event triple over (continuous state y, discrete part disc).

    event_value is signed so that the jump set is {event_value >= 0} and the
    flow set {event_value <= 0}; ``None`` means the system never jumps.
    """

    flow_map: Callable[[float, np.ndarray, object], np.ndarray]
    jump_map: Optional[Callable[[float, np.ndarray, object], tuple]] = None
    event_value: Optional[Callable[[float, np.ndarray, object], float]] = None

    def in_jump_set(self, t, y, disc) -> bool:
        return self.event_value is not None and self.event_value(t, y, disc) >= 0.0


@dataclass(frozen=True)
class IntegratorConfig:
    step_initial: float = 1e-4
    tol_rel: float = 1e-8
    tol_abs: float = 1e-10
    event_tol: float = 1e-9
    t_end: float = 10.0
    max_jumps: int = 100000
    max_step: float = np.inf

    def __post_init__(self):
        for name in ("step_initial", "tol_rel", "tol_abs", "event_tol", "max_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_end < 0 or self.max_jumps < 1:
            raise ValueError("t_end must be >= 0 and max_jumps >= 1")


@dataclass
class FlowSegment:
    """Dense trajectory of one flow interval, at accepted integrator points."""

    j: int
    ts: np.ndarray
    ys: np.ndarray
    evs: Optional[np.ndarray]
    disc: object
    exit_reason: str  # "event" | "horizon"

    @property
    def t_span(self):
        return float(self.ts[0]), float(self.ts[-1])

    @property
    def duration(self) -> float:
        return float(self.ts[-1] - self.ts[0])


@dataclass
class JumpRecord:
    j: int                      # index of this jump (1-based: j-th jump)
    t: float
    y_pre: np.ndarray
    y_post: np.ndarray
    event_pre: float
    event_post: float
    disc_post: object = field(repr=False, default=None)


@dataclass
class HybridArc:
    """A solution on a hybrid time domain: segments[k] evolves with jump
    counter j = k; jumps[k] separates segments[k] and segments[k+1]."""

    segments: list
    jumps: list
    zeno_flag: bool
    t_final: float

    @property
    def n_jumps(self) -> int:
        return len(self.jumps)

    def domain(self):
        """Ordered list of ((t_start, t_end), j) flow intervals."""
        return [(seg.t_span, seg.j) for seg in self.segments]


# Dormand-Prince 5(4) tableau; the fifth-order solution propagates and the
# seventh stage equals the next step's first (FSAL).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_ERR = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
                 22 / 525, -1 / 40])

_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_SAFETY = 0.9


def _hermite(t, t0, y0, f0, t1, y1, f1):
    """Cubic Hermite interpolant between two accepted points."""
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate_flow(sys: HybridSystem, y0, disc, t_start: float,
                   config: IntegratorConfig, j: int = 0):
    """Flow from t_start until the horizon or an upward event crossing.

    Returns a :class:`FlowSegment` whose ``exit_reason`` says which happened;
    on an event the segment is truncated at the localized crossing (the
    recorded final state lies in the jump set).
    """
    y = np.array(y0, dtype=float)
    t = float(t_start)
    t_end = config.t_end
    has_event = sys.event_value is not None

    ts = [t]
    ys = [y.copy()]
    evs = [sys.event_value(t, y, disc)] if has_event else None
    exit_reason = "horizon"

    if t >= t_end:
        return FlowSegment(j, np.array(ts), np.array(ys),
                           np.array(evs) if evs is not None else None,
                           disc, exit_reason)

    f = sys.flow_map(t, y, disc)
    if not np.all(np.isfinite(f)):
        raise IntegrationError("non-finite derivative at initial state", t, y)
    h = min(config.step_initial, config.max_step, t_end - t)
    stages = np.empty((7, y.size))

    while t < t_end:
        h = min(h, config.max_step)
        final = h >= t_end - t
        if final:
            h = t_end - t
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(
                f"step size underflow at t={t} (stiffness failure)", t, y)

        stages[0] = f
        for i in range(1, 7):
            yi = y + h * (stages[:i].T @ _A[i])
            stages[i] = sys.flow_map(t + _C[i] * h, yi, disc)
        y_new = y + h * (stages.T @ _B5)
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError("non-finite state during step", t, y)
        err_vec = h * (stages.T @ _ERR)
        scale = config.tol_abs + config.tol_rel * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))

        if err > 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            continue

        t_new = t_end if final else t + h
        f_new = stages[6]  # FSAL: last stage is f(t_new, y_new)
        if not np.all(np.isfinite(f_new)):
            raise IntegrationError("non-finite derivative", t_new, y_new)

        if has_event:
            ev_new = sys.event_value(t_new, y_new, disc)
            if ev_new >= 0.0:
                t_ev, y_ev = _locate_event(sys, disc, t, y, f, t_new, y_new,
                                           f_new, config.event_tol)
                ts.append(t_ev)
                ys.append(y_ev)
                evs.append(sys.event_value(t_ev, y_ev, disc))
                exit_reason = "event"
                break
            evs.append(ev_new)

        ts.append(t_new)
        ys.append(y_new.copy())
        t, y, f = t_new, y_new, f_new
        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
        h *= factor

    return FlowSegment(j, np.array(ts), np.array(ys),
                       np.array(evs) if evs is not None else None,
                       disc, exit_reason)


def _locate_event(sys, disc, t0, y0, f0, t1, y1, f1, event_tol):
    """Bisect the crossing bracket down to event_tol on the Hermite
    interpolant; returns the right end, whose event value is >= 0."""
    ta, tb = t0, t1
    yb = y1
    while tb - ta > event_tol:
        tm = 0.5 * (ta + tb)
        ym = _hermite(tm, t0, y0, f0, t1, y1, f1)
        if sys.event_value(tm, ym, disc) >= 0.0:
            tb, yb = tm, ym
        else:
            ta = tm
    return tb, np.array(yb, dtype=float)


def execute_jump(sys: HybridSystem, t: float, y, disc):
    """Apply the jump map at a state in the jump set; hard error outside it."""
    ev_pre = sys.event_value(t, y, disc) if sys.event_value is not None else 0.0
    if ev_pre < 0.0:
        raise JumpContractError(
            f"jump requested at t={t} with event value {ev_pre} < 0")
    if sys.jump_map is None:
        raise JumpContractError("system has no jump map")
    y_post, disc_post = sys.jump_map(t, np.array(y, dtype=float), disc)
    ev_post = (sys.event_value(t, y_post, disc_post)
               if sys.event_value is not None else 0.0)
    return JumpRecord(0, float(t), np.array(y, dtype=float),
                      np.array(y_post, dtype=float), float(ev_pre),
                      float(ev_post), disc_post)


def simulate(sys: HybridSystem, y0, disc0, config: IntegratorConfig) -> HybridArc:
    """Alternate flow and jumps from t = 0 until the horizon or the jump cap.

    A start inside the jump set produces a degenerate first interval and an
    immediate jump.  Exceeding ``max_jumps`` returns the truncated arc with
    ``zeno_flag`` set instead of raising.
    """
    y = np.array(y0, dtype=float)
    disc = disc0
    t = 0.0
    segments = []
    jumps = []
    zeno = False

    while True:
        j = len(jumps)
        if sys.in_jump_set(t, y, disc):
            ev = sys.event_value(t, y, disc)
            seg = FlowSegment(j, np.array([t]), np.array([y.copy()]),
                              np.array([ev]), disc, "event")
        else:
            seg = integrate_flow(sys, y, disc, t, config, j=j)
        segments.append(seg)
        t = float(seg.ts[-1])
        y = seg.ys[-1].copy()
        if seg.exit_reason == "horizon":
            break
        if len(jumps) >= config.max_jumps:
            zeno = True
            break
        rec = execute_jump(sys, t, y, disc)
        rec.j = len(jumps) + 1
        jumps.append(rec)
        y = rec.y_post.copy()
        disc = rec.disc_post

    return HybridArc(segments, jumps, zeno, t)


@dataclass(frozen=True)
class DwellReport:
    """Empirical dwell-time witnesses of an arc."""

    n_jumps: int
    min_interjump: Optional[float]
    max_interjump: Optional[float]
    max_flow_to_event: Optional[float]
    post_jump_event_max: Optional[float]
    max_abs_event_rate: Optional[float]
    persistence_bound: Optional[float]


def dwell_time_monitor(arc: HybridArc, require_regenerative: bool = True) -> DwellReport:
    """Dwell-time statistics plus the regenerative-jump assertion.

    Asserts (when ``require_regenerative``) that every post-jump event value
    is negative, i.e. each jump resets the trigger below threshold.  The
    persistence bound (threshold gap over the maximal observed event slope)
    certifies a strictly positive lower bound on inter-jump durations; with
    fewer than two jumps the inter-jump statistics are reported as None.
    """
    jump_times = [rec.t for rec in arc.jumps]
    post_max = max((rec.event_post for rec in arc.jumps), default=None)
    if require_regenerative:
        for rec in arc.jumps:
            if rec.event_post >= 0.0:
                raise JumpContractError(
                    f"jump {rec.j} at t={rec.t} left the state in the jump set "
                    f"(post-jump event value {rec.event_post})")

    if len(jump_times) >= 2:
        gaps = np.diff(jump_times)
        min_ij, max_ij = float(gaps.min()), float(gaps.max())
    else:
        min_ij = max_ij = None

    flow_durs = [seg.duration for seg in arc.segments if seg.exit_reason == "event"]
    max_flow = max(flow_durs) if flow_durs else None

    max_rate = None
    for seg in arc.segments:
        if seg.evs is None or len(seg.ts) < 2:
            continue
        dt = np.diff(seg.ts)
        keep = dt > 0
        if np.any(keep):
            rates = np.abs(np.diff(seg.evs)[keep] / dt[keep])
            seg_max = float(rates.max())
            max_rate = seg_max if max_rate is None else max(max_rate, seg_max)

    bound = None
    if post_max is not None and max_rate is not None and max_rate > 0 and post_max < 0:
        bound = -post_max / max_rate
    return DwellReport(arc.n_jumps, min_ij, max_ij, max_flow, post_max,
                       max_rate, bound)
