"""Integration of the mean-field systems through the switching manifold.

The full mean field drives (s, w) with the exact population firing rate;
the reduced mean field replaces the rate by k*sqrt(I - I*(s, w)).  Both
vector fields are continuous but non-differentiable on the manifold
H(s, w) = I - I*(s, w) = 0, so the integrator localizes every sign change
of H by shrinking the step onto the crossing and bisecting, rather than
trusting a dense-output polynomial across the kink.  An optional
epsilon-embedded mode integrates the three-dimensional singularly
perturbed companion system whose fast variable R relaxes onto 0 or
sqrt(H).

The integrator itself is a standard Dormand-Prince 5(4) pair with a PI
step controller, written against plain Python floats: the systems are
two- or three-dimensional and the per-call overhead of array machinery
would dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import Indeterminate, NonConvergence, StepSizeUnderflow
from .models import (
    ModelKind,
    ModelParams,
    derive,
    firing_rate_full,
    switching_H,
    H_SNAP,
)

__all__ = [
    "MeanFieldState",
    "EmbeddedState",
    "Trajectory",
    "LimitCycleSummary",
    "MFSystem",
    "AttractorKind",
    "AttractorInfo",
    "EventSpec",
    "integrate",
    "integrate_embedded",
    "integrate_raw",
    "classify_attractor",
    "make_rhs",
    "make_switching_fn",
]


@dataclass(frozen=True)
class MeanFieldState:
    s: float
    w: float

    def as_tuple(self):
        return (self.s, self.w)


@dataclass(frozen=True)
class EmbeddedState:
    s: float
    w: float
    R: float
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.R < 0:
            raise ValueError("R must be nonnegative")


@dataclass
class Trajectory:
    """Sampled solution with derivative samples and manifold crossings.

    ``crossings`` holds (time, direction) pairs where direction +1 means
    the trajectory entered the firing region H > 0.  Between consecutive
    crossings H keeps one sign.  ``r`` is populated for embedded runs.
    """

    times: np.ndarray
    s: np.ndarray
    w: np.ndarray
    ds: np.ndarray
    dw: np.ndarray
    crossings: list
    params: ModelParams
    reverse_time: bool = False
    r: np.ndarray | None = None

    @property
    def states(self):
        return [MeanFieldState(si, wi) for si, wi in zip(self.s, self.w)]

    def H(self) -> np.ndarray:
        return np.array([switching_H(self.params, si, wi) for si, wi in zip(self.s, self.w)])


@dataclass(frozen=True)
class LimitCycleSummary:
    """One tracked limit cycle: w-amplitude, period, stability, smoothness."""

    amplitude_w: float
    period: float
    stable: bool
    nonsmooth: bool
    section_point: MeanFieldState
    min_H: float = math.nan
    n_crossings: int = 0


class MFSystem(Enum):
    FULL = "full"
    REDUCED = "reduced"


class AttractorKind(Enum):
    EQUILIBRIUM = "equilibrium"
    LIMIT_CYCLE = "limit_cycle"
    ORIGIN = "origin"


@dataclass(frozen=True)
class AttractorInfo:
    kind: AttractorKind
    point: MeanFieldState | None = None
    cycle: LimitCycleSummary | None = None


@dataclass
class EventSpec:
    """Scalar event g(t, y) whose sign changes are localized by bisection.

    direction: +1 fires only on - to + crossings, -1 only on + to -,
    0 on any.  Terminal events stop the integration at the crossing.
    """

    fn: object
    direction: int = 0
    terminal: bool = False
    name: str = ""


# ---------------------------------------------------------------------------
# switching functions and vector fields, specialized per model kind so the
# integrator's inner loop stays on plain floats

def make_switching_fn(params: ModelParams):
    """Return a fast closure computing H(s, w) for this parameter set."""
    g, e_r, I = params.g, params.e_r, params.I
    kind = params.kind
    if kind is ModelKind.IZHIKEVICH:
        al = params.alpha

        def H(s, w):
            gs = g * s
            return I - w + gs * e_r - 0.25 * (al + gs) ** 2

    elif kind is ModelKind.ADEX:

        def H(s, w):
            gs = g * s
            return I - w + gs * e_r - (1.0 + gs) * (math.log1p(gs) - 1.0)

    elif kind is ModelKind.QUARTIC:
        a4 = params.a_quartic

        def H(s, w):
            gs = g * s
            return I - w + gs * e_r - 3.0 * ((gs + 2.0 * a4) / 4.0) ** (4.0 / 3.0)

    else:  # LIF
        mu0, vp = 1.0 / params.tau_m, params.v_peak

        def H(s, w):
            gs = g * s
            return I - w + gs * e_r - vp * (mu0 + gs)

    return H


def _make_reduced_rhs(params: ModelParams):
    dd, _ = derive(params)
    inv_ts, inv_tw = 1.0 / params.tau_s, 1.0 / params.tau_w
    sa, wa = dd.s_amp, dd.w_amp
    H = make_switching_fn(params)

    def rhs(t, y):
        s, w = y
        h = H(s, w)
        if h > H_SNAP:
            r = math.sqrt(h)
            return (-s * inv_ts + sa * r, -w * inv_tw + wa * r)
        return (-s * inv_ts, -w * inv_tw)

    return rhs


def _make_full_rhs(params: ModelParams):
    inv_ts, inv_tw = 1.0 / params.tau_s, 1.0 / params.tau_w
    sj, wj = params.s_jump, params.w_jump
    kind = params.kind
    if kind is ModelKind.IZHIKEVICH:
        g, e_r, I, al = params.g, params.e_r, params.I, params.alpha
        vp, vr = params.v_peak, params.v_reset
        H = make_switching_fn(params)

        def rate(s, w):
            h = H(s, w)
            if h <= H_SNAP:
                return 0.0
            vs = 0.5 * (al + g * s)
            rt = math.sqrt(h)
            return rt / (math.atan((vp - vs) / rt) - math.atan((vr - vs) / rt))

    else:

        def rate(s, w):
            return firing_rate_full(params, s, w)

    def rhs(t, y):
        s, w = y
        r = rate(s, w)
        return (-s * inv_ts + sj * r, -w * inv_tw + wj * r)

    return rhs


def make_rhs(system: MFSystem, params: ModelParams):
    if system is MFSystem.REDUCED:
        return _make_reduced_rhs(params)
    return _make_full_rhs(params)


def _make_embedded_rhs(params: ModelParams, epsilon: float):
    dd, _ = derive(params)
    inv_ts, inv_tw = 1.0 / params.tau_s, 1.0 / params.tau_w
    sa, wa = dd.s_amp, dd.w_amp
    inv_eps = 1.0 / epsilon
    H = make_switching_fn(params)

    def rhs(t, y):
        s, w, r = y
        return (
            -s * inv_ts + sa * r,
            -w * inv_tw + wa * r,
            r * (H(s, w) - r * r) * inv_eps,
        )

    return rhs


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with bisection-localized events

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))

# A straddling step is not bisected until it has been shrunk to this size,
# so the micro-steps used inside the bisection stay accurate.
_H_LOCATE = 1e-6
_EVENT_VALUE_TOL = 1e-12


def _rk4(rhs, t, y, h):
    k1 = rhs(t, y)
    n = len(y)
    y2 = tuple(y[i] + 0.5 * h * k1[i] for i in range(n))
    k2 = rhs(t + 0.5 * h, y2)
    y3 = tuple(y[i] + 0.5 * h * k2[i] for i in range(n))
    k3 = rhs(t + 0.5 * h, y3)
    y4 = tuple(y[i] + h * k3[i] for i in range(n))
    k4 = rhs(t + h, y4)
    return tuple(
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(n)
    )


def _dopri_step(rhs, t, y, h, f0):
    n = len(y)
    k = [f0]
    for stage in range(1, 7):
        a = _A[stage]
        yi = tuple(
            y[i] + h * sum(a[j] * k[j][i] for j in range(stage)) for i in range(n)
        )
        k.append(rhs(t + _C[stage] * h, yi))
    y5 = tuple(
        y[i] + h * sum(_B5[j] * k[j][i] for j in range(7)) for i in range(n)
    )
    err = tuple(h * sum(_E[j] * k[j][i] for j in range(7)) for i in range(n))
    return y5, err


def _error_norm(err, y_old, y_new, rtol, atol):
    acc = 0.0
    for e, a, b in zip(err, y_old, y_new):
        scale = atol + rtol * max(abs(a), abs(b))
        acc += (e / scale) ** 2
    return math.sqrt(acc / len(err))


def integrate_raw(
    rhs,
    y0,
    duration,
    rtol=1e-10,
    atol=1e-14,
    max_step=math.inf,
    events=(),
    record=True,
    t0=0.0,
    first_step=None,
    post_step=None,
    max_steps=20_000_000,
    escape_radius=math.inf,
):
    """Adaptive integration of dy/dt = rhs(t, y) on [t0, t0 + duration].

    Events are located by shrinking any straddling step below ``_H_LOCATE``
    and bisecting inside it with single classical RK4 micro-steps; the
    state is advanced to just past the crossing (never placed exactly on
    it).  ``post_step`` may transform the accepted state (used to clamp
    the embedded fast variable).

    Returns (times, ys, dys, event_records, status, t_end, y_end) where
    event_records is a list of (time, event_index, direction, y) and
    status is "done" or "event" when a terminal event fired.  The final
    state is reported even when ``record`` is False.
    """
    t_end = t0 + duration
    t = t0
    y = tuple(float(v) for v in y0)
    f = rhs(t, y)
    times, ys, dys = [t], [y], [f]
    records = []
    ev_vals = [e.fn(t, y) for e in events]
    suppress = False

    if first_step is None:
        scale = max(1.0, max(abs(v) for v in y))
        fmag = max(abs(v) for v in f) + 1e-16
        h = min(0.01 * scale / fmag, duration, max_step)
    else:
        h = min(first_step, duration, max_step)
    h_floor = 1e-13 * max(1.0, abs(t_end))
    n_steps = 0

    while t < t_end - 1e-14 * max(1.0, abs(t_end)):
        n_steps += 1
        if n_steps > max_steps:
            raise NonConvergence("integration exceeded the step budget")
        h = min(h, t_end - t, max_step)
        if h < h_floor:
            raise StepSizeUnderflow(f"step size underflow at t={t}")
        y_new, err = _dopri_step(rhs, t, y, h, f)
        if not all(math.isfinite(v) for v in y_new):
            h *= 0.25
            continue
        enorm = _error_norm(err, y, y_new, rtol, atol)
        if enorm > 1.0:
            h *= max(0.2, 0.9 * enorm ** -0.2)
            continue

        hit = None
        if events and not suppress:
            t_new = t + h
            for idx, ev in enumerate(events):
                v_old, v_new = ev_vals[idx], ev.fn(t_new, y_new)
                if abs(v_old) <= _EVENT_VALUE_TOL:
                    continue
                if v_old * v_new < 0.0:
                    direction = 1 if v_new > v_old else -1
                    if ev.direction == 0 or ev.direction == direction:
                        hit = (idx, direction)
                        break
        if hit is not None:
            if h > _H_LOCATE:
                h = max(0.2 * h, 0.5 * _H_LOCATE)
                continue
            idx, direction = hit
            ev = events[idx]
            lo, hi = 0.0, 1.0
            v_lo = ev_vals[idx]
            y_hi, v_hi = y_new, ev.fn(t + h, y_new)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                y_mid = _rk4(rhs, t, y, mid * h)
                v_mid = ev.fn(t + mid * h, y_mid)
                if v_lo * v_mid < 0.0:
                    hi, y_hi, v_hi = mid, y_mid, v_mid
                else:
                    lo, v_lo = mid, v_mid
                if abs(v_hi) <= _EVENT_VALUE_TOL:
                    break
            t = t + hi * h
            y = y_hi
            f = rhs(t, y)
            ev_vals = [e.fn(t, y) for e in events]
            records.append((t, idx, direction, y))
            if record:
                times.append(t)
                ys.append(y)
                dys.append(f)
            if ev.terminal:
                return (
                    np.array(times),
                    np.array(ys),
                    np.array(dys),
                    records,
                    "event",
                    t,
                    y,
                )
            h = 50.0 * _H_LOCATE
            suppress = True
            continue

        t += h
        y = y_new
        if post_step is not None:
            y = post_step(y)
        if max(abs(v) for v in y) > escape_radius:
            return np.array(times), np.array(ys), np.array(dys), records, "escape", t, y
        f = rhs(t, y)
        if events:
            ev_vals = [e.fn(t, y) for e in events]
        suppress = False
        if record:
            times.append(t)
            ys.append(y)
            dys.append(f)
        h *= min(5.0, max(0.3, 0.9 * (enorm + 1e-16) ** -0.2))

    return np.array(times), np.array(ys), np.array(dys), records, "done", t, y


# ---------------------------------------------------------------------------
# public entry points

def _default_max_step(params: ModelParams, duration: float) -> float:
    return min(max(duration / 16.0, 1e-3), max(params.tau_s, params.tau_w / 20.0))


def integrate(
    system: MFSystem,
    params: ModelParams,
    init,
    duration: float,
    tol: float = 1e-10,
    reverse_time: bool = False,
    max_step: float | None = None,
    extra_events=(),
    record: bool = True,
) -> Trajectory:
    """Integrate the full or reduced mean field from ``init``.

    Every sign change of H along the solution is localized to
    |H| < 1e-12 and recorded in Trajectory.crossings as (time, direction)
    with direction +1 when entering the firing region.  The vector field
    is continuous across the manifold, so the state itself is not
    modified at events.  ``reverse_time`` integrates the time-reversed
    field (used to converge onto unstable limit cycles).
    """
    if isinstance(init, MeanFieldState):
        y0 = init.as_tuple()
    else:
        y0 = (float(init[0]), float(init[1]))
    base = make_rhs(system, params)
    rhs = (lambda t, y: tuple(-v for v in base(t, y))) if reverse_time else base
    Hfn = make_switching_fn(params)
    events = [EventSpec(lambda t, y: Hfn(y[0], y[1]), direction=0, name="manifold")]
    events.extend(extra_events)
    if max_step is None:
        max_step = _default_max_step(params, duration)
    times, ys, dys, records, _, _, _ = integrate_raw(
        rhs, y0, duration, rtol=tol, atol=1e-14, max_step=max_step, events=events,
        record=record,
    )
    crossings = [(t, d) for (t, idx, d, _y) in records if idx == 0]
    return Trajectory(
        times=times,
        s=ys[:, 0],
        w=ys[:, 1],
        ds=dys[:, 0],
        dw=dys[:, 1],
        crossings=crossings,
        params=params,
        reverse_time=reverse_time,
    )


def integrate_embedded(
    params: ModelParams,
    init: EmbeddedState,
    duration: float,
    tol: float = 1e-10,
    r_floor: float = 1e-14,
    max_step: float | None = None,
) -> Trajectory:
    """Integrate the 3-D epsilon-embedded system.

    The fast equation eps * dR/dt = R (H - R^2) relaxes R onto sqrt(H)
    where H > 0 and onto 0 where H < 0.  Because R = 0 is invariant and
    exponentially attracting in the quiescent region, the raw singular
    system re-ignites only after a delayed exchange of stability; clamping
    R from below at ``r_floor`` (default 1e-14) emulates the
    piecewise-smooth limit instead.  Pass r_floor=0 for the unclamped
    dynamics.
    """
    rhs = _make_embedded_rhs(params, init.epsilon)
    Hfn = make_switching_fn(params)
    events = [EventSpec(lambda t, y: Hfn(y[0], y[1]), direction=0, name="manifold")]

    def clamp(y):
        if y[2] < r_floor:
            return (y[0], y[1], r_floor)
        return y

    if max_step is None:
        max_step = _default_max_step(params, duration)
    times, ys, dys, records, _, _, _ = integrate_raw(
        rhs,
        (init.s, init.w, max(init.R, r_floor)),
        duration,
        rtol=tol,
        atol=1e-14,
        max_step=max_step,
        events=events,
        post_step=clamp if r_floor > 0 else None,
    )
    crossings = [(t, d) for (t, idx, d, _y) in records if idx == 0]
    return Trajectory(
        times=times,
        s=ys[:, 0],
        w=ys[:, 1],
        ds=dys[:, 0],
        dw=dys[:, 1],
        crossings=crossings,
        params=params,
        r=ys[:, 2],
    )


# ---------------------------------------------------------------------------
# attractor classification

def _hermite_root(t0, t1, v0, v1, d0, d1):
    # cubic Hermite zero of a scalar sample straddling 0; bisection on the
    # interpolant keeps this robust for any sample shape
    h = t1 - t0
    if h <= 0 or v0 * v1 > 0:
        return None

    def interp(u):
        u2, u3 = u * u, u * u * u
        return (
            (2 * u3 - 3 * u2 + 1) * v0
            + (u3 - 2 * u2 + u) * h * d0
            + (-2 * u3 + 3 * u2) * v1
            + (u3 - u2) * h * d1
        )

    lo, hi, flo = 0.0, 1.0, v0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        fm = interp(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return t0 + 0.5 * (lo + hi) * h


def _section_crossings(traj: Trajectory, eta: float):
    """Times and interpolated states of downward crossings of w = eta*s."""
    sig = traj.w - eta * traj.s
    dsig = traj.dw - eta * traj.ds
    hits = []
    for i in range(len(sig) - 1):
        if sig[i] > 0.0 and sig[i + 1] <= 0.0 and sig[i + 1] != sig[i]:
            tc = _hermite_root(
                traj.times[i], traj.times[i + 1], sig[i], sig[i + 1], dsig[i], dsig[i + 1]
            )
            if tc is None:
                continue
            u = (tc - traj.times[i]) / (traj.times[i + 1] - traj.times[i])
            sc = traj.s[i] + (traj.s[i + 1] - traj.s[i]) * u
            wc = traj.w[i] + (traj.w[i + 1] - traj.w[i]) * u
            hits.append((tc, sc, wc))
    return hits


def classify_attractor(
    traj: Trajectory, settle_fraction: float = 0.5
) -> AttractorInfo:
    """Classify the attractor reached by a settled trajectory.

    Origin if the tail norm stays below 1e-10; Equilibrium if the tail
    has diameter below 1e-8; LimitCycle if Poincare returns on the ray
    w = eta*s repeat with period stable to a relative 1e-6.  Raises
    Indeterminate otherwise.
    """
    n = len(traj.times)
    if n < 8:
        raise Indeterminate("trajectory too short to classify")
    i0 = int(n * (1.0 - settle_fraction))
    s_t, w_t = traj.s[i0:], traj.w[i0:]
    norm = np.sqrt(s_t**2 + w_t**2)
    if norm.max() < 1e-10:
        return AttractorInfo(AttractorKind.ORIGIN, point=MeanFieldState(0.0, 0.0))
    diam = math.hypot(s_t.max() - s_t.min(), w_t.max() - w_t.min())
    if diam < 1e-8:
        return AttractorInfo(
            AttractorKind.EQUILIBRIUM,
            point=MeanFieldState(float(s_t.mean()), float(w_t.mean())),
        )

    dd, _ = derive(traj.params)
    tail = Trajectory(
        times=traj.times[i0:], s=s_t, w=w_t, ds=traj.ds[i0:], dw=traj.dw[i0:],
        crossings=[], params=traj.params,
    )
    hits = _section_crossings(tail, dd.eta)
    if len(hits) < 3:
        raise Indeterminate("fewer than three section returns in the tail")
    t3, t2, t1 = hits[-3][0], hits[-2][0], hits[-1][0]
    p_prev, p_last = t2 - t3, t1 - t2
    if abs(p_last - p_prev) > 1e-6 * p_last:
        raise Indeterminate(
            f"section return period not settled ({p_prev:.6g} vs {p_last:.6g})"
        )
    mask = (tail.times >= t2) & (tail.times <= t1)
    amp = float(tail.w[mask].max() - tail.w[mask].min()) if mask.any() else 0.0
    t_lo, t_hi = min(t2, t1), max(t2, t1)
    n_cross = sum(1 for (tc, _d) in traj.crossings if t_lo <= tc <= t_hi)
    summary = LimitCycleSummary(
        amplitude_w=amp,
        period=float(p_last),
        stable=not traj.reverse_time,
        nonsmooth=n_cross >= 2,
        section_point=MeanFieldState(hits[-1][1], hits[-1][2]),
        n_crossings=n_cross,
    )
    return AttractorInfo(AttractorKind.LIMIT_CYCLE, cycle=summary)
