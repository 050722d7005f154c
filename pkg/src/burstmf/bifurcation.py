"""Two-parameter bifurcation structure of the reduced mean field.

Smooth curves come in closed form from the weak-coupling expansion:

    I_SN(g) = I_rh - A2(g) M(g)^2 (g - g*)^2          (g >= g*)
    I_AH(g) = I_rh + A2(g) [N^2 (g - gbar)^2
                            - 2 M N (g - gbar)(g - g*)]   (g >= gbar)

with the saddle-node equilibrium at s_SN = M(g)(g - g*) and the Hopf
equilibrium at s_AH = N(g)(g - gbar).  Their intersections solve a
quadratic in g (Bogdanov-Takens candidates).  The non-smooth side --
grazing of limit cycles on the switching manifold, the saddle-node of
non-smooth limit cycles, and the boundary-equilibrium line I = I_rh with
its codimension-2 organizing points -- is computed by direct cycle
tracking with Poincare returns on the ray w = eta*s, which all nontrivial
equilibria lie on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .equilibria import BEBType, Branch, EqMode, beb_classify, nontrivial_equilibria
from .errors import (
    BracketInvalid,
    DomainError,
    NoCycleFound,
    NoHopfRegime,
    NonConvergence,
    UnsupportedModel,
)
from .meanfield import (
    EventSpec,
    LimitCycleSummary,
    MeanFieldState,
    MFSystem,
    integrate_raw,
    make_rhs,
    make_switching_fn,
)
from .models import ModelParams, derive

__all__ = [
    "LimitCycleSummary",
    "BifurcationDiagram",
    "CodimPoint",
    "BTCandidate",
    "GrazingKind",
    "saddle_node_curve",
    "hopf_curve",
    "bt_points",
    "g_hat",
    "s_sn",
    "s_ah",
    "I_sn_of_g",
    "I_ah_of_g",
    "tangency_check",
    "homoclinic_return",
    "track_limit_cycle",
    "cycle_min_H",
    "grazing_point",
    "snlc_point",
    "global_grazing_point",
    "codim2_points",
    "assemble_diagram",
]


class GrazingKind(Enum):
    PERSISTENCE = "persistence"
    DESTRUCTION = "destruction"


@dataclass(frozen=True)
class CodimPoint:
    label: str
    g: float
    I: float


@dataclass(frozen=True)
class BTCandidate:
    g: float
    degenerate: bool = False  # tau_w = tau_s: merged with g* = gbar (codim 3)


@dataclass
class BifurcationDiagram:
    sn_curve: list
    hopf_curve: list
    grazing_curve: list
    snlc_curve: list
    beb_segments: list        # (g_lo, g_hi, BEBType) along I = I_rh
    codim2: list
    codim3: float | None
    I_rh: float
    g_star: float
    g_bar: float
    g_hat: float | None


# ---------------------------------------------------------------------------
# closed-form curves

def _fns_or_raise(params):
    dd, fns = derive(params)
    if fns is None:
        raise UnsupportedModel("bifurcation formulas require F'' > 0 (not LIF)")
    return dd, fns


def I_sn_of_g(params: ModelParams, g: float) -> float:
    dd, fns = _fns_or_raise(params)
    if g < dd.g_star - 1e-12:
        raise DomainError(f"saddle-node curve is defined for g >= g* = {dd.g_star:.6g}")
    return dd.I_rh - fns.A2(g) * fns.M(g) ** 2 * (g - dd.g_star) ** 2


def I_ah_of_g(params: ModelParams, g: float) -> float:
    dd, fns = _fns_or_raise(params)
    if dd.g_star <= dd.g_bar:
        raise NoHopfRegime("no Hopf bifurcation occurs when g* <= gbar")
    if g < dd.g_bar - 1e-12:
        raise DomainError(f"Hopf curve is defined for g >= gbar = {dd.g_bar:.6g}")
    n, m = fns.N(g), fns.M(g)
    return dd.I_rh + fns.A2(g) * (
        n**2 * (g - dd.g_bar) ** 2 - 2.0 * m * n * (g - dd.g_bar) * (g - dd.g_star)
    )


def s_sn(params: ModelParams, g: float) -> float:
    """s-coordinate of the saddle-node equilibrium on I_SN(g)."""
    dd, fns = _fns_or_raise(params)
    return fns.M(g) * (g - dd.g_star)


def s_ah(params: ModelParams, g: float) -> float:
    """s-coordinate of the Hopf equilibrium on I_AH(g)."""
    dd, fns = _fns_or_raise(params)
    return fns.N(g) * (g - dd.g_bar)


def saddle_node_curve(params: ModelParams, g_range, n_points: int) -> list:
    """(g, I_SN(g)) samples; the range must sit inside [g*, inf)."""
    lo, hi = g_range
    dd, _ = _fns_or_raise(params)
    if lo < dd.g_star - 1e-12:
        raise DomainError(f"requested g range starts below g* = {dd.g_star:.6g}")
    return [(g, I_sn_of_g(params, g)) for g in np.linspace(lo, hi, n_points)]


def hopf_curve(params: ModelParams, g_range, n_points: int) -> list:
    """(g, I_AH(g), bt_candidate) samples; raises NoHopfRegime if g* <= gbar.

    A point is flagged as a Bogdanov-Takens candidate when it is the grid
    point closest to a root of I_AH = I_SN (genericity is not checked).
    """
    lo, hi = g_range
    dd, _ = _fns_or_raise(params)
    if dd.g_star <= dd.g_bar:
        raise NoHopfRegime("no Hopf bifurcation occurs when g* <= gbar")
    if lo < dd.g_bar - 1e-12:
        raise DomainError(f"requested g range starts below gbar = {dd.g_bar:.6g}")
    gs = np.linspace(lo, hi, n_points)
    bt_gs = [c.g for c in bt_points(params)]
    out = []
    for g in gs:
        near_bt = any(abs(g - gb) <= 0.5 * (hi - lo) / max(n_points - 1, 1) for gb in bt_gs)
        out.append((float(g), I_ah_of_g(params, float(g)), near_bt))
    return out


def bt_points(params: ModelParams) -> list:
    """Bogdanov-Takens candidates: roots of I_AH(g) = I_SN(g).

    The condition N(g)(g - gbar) = M(g)(g - g*) reduces to the quadratic
    a2 g^2 + a1 g + a0 = 0 with

        a2 = s_amp w_amp v*'(0) (tau_w - tau_s) / (e_r - v*(0))
        a1 = -2 / tau_w
        a0 = 2 eta / (tau_s (e_r - v*(0)))

    Only roots with g > max(g*, gbar) qualify.  tau_w = tau_s is
    degenerate: the single root g = g* = gbar is the codimension-3 point,
    returned with degenerate=True.
    """
    dd, fns = _fns_or_raise(params)
    drive = params.e_r - dd.v_star_0
    a2 = dd.s_amp * dd.w_amp * dd.v_star_prime_0 * (params.tau_w - params.tau_s) / drive
    a1 = -2.0 / params.tau_w
    a0 = 2.0 * dd.eta / (params.tau_s * drive)
    tau_scale = max(params.tau_w, params.tau_s)
    if abs(params.tau_w - params.tau_s) <= 1e-12 * tau_scale:
        return [BTCandidate(g=dd.g_star, degenerate=True)]
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        return []
    root = math.sqrt(disc)
    cands = [(-a1 - root) / (2.0 * a2), (-a1 + root) / (2.0 * a2)]
    cutoff = max(dd.g_star, dd.g_bar)
    return [BTCandidate(g=g) for g in sorted(c for c in cands if c > cutoff + 1e-12)]


def g_hat(params: ModelParams, g_max: float | None = None) -> float | None:
    """Second intersection of the Hopf curve with I = I_rh, beyond g*.

    Solved by bracketed root finding on I_AH(g) - I_rh; returns None when
    the Hopf regime is absent or the curve never re-crosses.
    """
    dd, fns = _fns_or_raise(params)
    if dd.g_star <= dd.g_bar:
        return None

    def f(g):
        return I_ah_of_g(params, g) - dd.I_rh

    lo = dd.g_star + 1e-9
    if g_max is None:
        g_max = 50.0 * dd.g_star
    hi = lo * 1.5
    flo = f(lo)
    while f(hi) * flo > 0.0:
        hi *= 1.5
        if hi > g_max:
            return None
    return brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16)


def tangency_check(params: ModelParams) -> tuple[float, float]:
    """Slopes at the origin of the equilibrium ray and the switching manifold.

    Returns (eta, g (e_r - v*(0))); they coincide exactly at g = g*, where
    the saddle-node equilibrium meets the manifold tangentially.
    """
    dd, _ = derive(params)
    return dd.eta, params.g * (params.e_r - dd.v_star_0)


# ---------------------------------------------------------------------------
# homoclinic return map on I = I_rh

def homoclinic_return(params: ModelParams, g: float, s0: float) -> float | None:
    """Second manifold intersection of the quiescent orbit through (s0, w0).

    On I = I_rh a trajectory entering the quiescent region at s0 follows
    w = w0 (s/s0)^gamma, and any further manifold intersection solves

        (1 - k s0) (s/s0)^(gamma-1) = 1 - k s,
        k = g v*'(0) / (2 (e_r - v*(0))).

    Returns the nontrivial root (s != s0), or None when it does not exist:
    for gamma >= 1 every entering trajectory falls to the origin, and for
    gamma < 1 the root degenerates onto s0 exactly at tangency.  A root
    below s0 is a genuine return to the firing side; a root above s0 is
    the entry point of the orbit that exits at s0.
    """
    dd, _ = derive(params)
    if dd.v_star_prime_0 is None:
        raise UnsupportedModel("homoclinic return map requires F'' > 0")
    gamma = dd.gamma
    if gamma >= 1.0:
        return None
    kc = g * dd.v_star_prime_0 / (2.0 * (params.e_r - dd.v_star_0))
    q = kc * s0
    if not 0.0 < q < 1.0:
        raise ValueError(
            f"s0 = {s0} is not on the positive-w branch of the manifold (k*s0 = {q:.4g})"
        )

    def phi(u):
        return (1.0 - q) * u ** (gamma - 1.0) + q * u - 1.0

    dphi1 = (1.0 - q) * (gamma - 1.0) + q
    if abs(dphi1) < 1e-14:
        return None
    if dphi1 > 0.0:
        # root in (0, 1): phi -> +inf at 0+, negative just left of 1
        hi = 1.0 - 1e-12
        lo = hi / 2.0
        while phi(lo) < 0.0:
            lo *= 0.5
            if lo < 1e-300:
                return None
        return s0 * brentq(phi, lo, hi, xtol=1e-15, rtol=8.9e-16)
    # root in (1, inf): phi negative just right of 1, -> +inf with u
    lo = 1.0 + 1e-12
    hi = 2.0
    while phi(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            return None
    return s0 * brentq(phi, lo, hi, xtol=1e-15, rtol=8.9e-16)


# ---------------------------------------------------------------------------
# limit-cycle tracking by Poincare returns on the ray w = eta*s

_RETURN_TOL = 1e-8
_PERIOD_RTOL = 1e-6
_CHUNK_TAUW = 60.0
_AMP_FLOOR = 1e-9


def _default_exterior_init(params, dd, fns):
    # start in the quiescent region above the firing-branch fold, so the
    # orbit joins any stable cycle from outside
    g = params.g
    delta = max(params.I - dd.I_rh, 0.0)
    w_fold = delta + (g * (params.e_r - dd.v_star_0)) ** 2 / (2.0 * fns.A2(g))
    return (1e-8, w_fold + 0.1 * abs(dd.I_rh) + 1e-3)


def _interior_init(params):
    eqs = [
        e
        for e in nontrivial_equilibria(params, EqMode.WEAK_COUPLING)
        if e.branch is Branch.E_PLUS
    ]
    if not eqs:
        raise NoCycleFound("no e+ equilibrium to seed the reverse-time search")
    pt = eqs[0].point
    return (pt.s * (1.0 + 1e-3) + 1e-9, pt.w * (1.0 - 1e-3))


def track_limit_cycle(
    params: ModelParams,
    g: float,
    I: float,
    want_stable: bool = True,
    init_hint=None,
    tol: float = 1e-10,
    transient_factor: float = 500.0,
    return_tol: float = _RETURN_TOL,
    period_rtol: float = _PERIOD_RTOL,
    n_dense: int = 12000,
) -> LimitCycleSummary:
    """Track one limit cycle of the reduced mean field at (g, I).

    Stable cycles are found by forward integration from an exterior
    point; unstable cycles by integrating the time-reversed field from
    just off e+ (the reversed flow converges onto them from both sides).
    Returns are taken on the ray w = eta*s.  Convergence requires two
    consecutive return points within ``return_tol`` and periods within
    ``period_rtol``; geometric sequences of returns are Aitken-
    extrapolated and the extrapolated point verified.  Raises NoCycleFound
    when the orbit collapses onto an equilibrium, escapes, or the
    transient budget (transient_factor * tau_w) is exhausted.
    """
    pp = params.with_(g=g, I=I)
    dd, fns = _fns_or_raise(pp)
    base = make_rhs(MFSystem.REDUCED, pp)
    rhs = base if want_stable else (lambda t, y: tuple(-v for v in base(t, y)))
    eta = dd.eta

    if init_hint is not None:
        y = (
            init_hint.as_tuple()
            if isinstance(init_hint, MeanFieldState)
            else (float(init_hint[0]), float(init_hint[1]))
        )
    elif want_stable:
        y = _default_exterior_init(pp, dd, fns)
    else:
        y = _interior_init(pp)

    e_plus = None
    eqs = [
        e
        for e in nontrivial_equilibria(pp, EqMode.WEAK_COUPLING)
        if e.branch is Branch.E_PLUS
    ]
    if eqs:
        e_plus = eqs[0].point.as_tuple()

    section = EventSpec(fn=lambda t, yy: yy[1] - eta * yy[0], direction=-1, terminal=True)
    scale = dd.lambda_s * math.sqrt(abs(I) + abs(dd.I_rh) + 1.0) * (1.0 + eta)
    escape = 1e3 * (1.0 + scale)
    budget = transient_factor * pp.tau_w
    chunk = _CHUNK_TAUW * pp.tau_w

    t_used = 0.0
    hits = []      # (t_cumulative, y)
    dists = []
    while t_used < budget:
        _, _, _, recs, status, t_end, y_end = integrate_raw(
            rhs,
            y,
            min(chunk, budget - t_used),
            rtol=tol,
            atol=1e-14,
            max_step=max(pp.tau_s, pp.tau_w / 20.0),
            events=[section],
            record=False,
            escape_radius=escape,
        )
        t_used += t_end - 0.0
        y = y_end
        if status == "escape":
            raise NoCycleFound("trajectory escaped the region of interest")
        if status != "event":
            # no section return in a whole chunk: settled to a point or quiescent
            speed = math.hypot(*rhs(0.0, y))
            if speed < 1e-12 or math.hypot(y[0], y[1]) < 1e-10:
                raise NoCycleFound("trajectory settled without section returns")
            continue
        hits.append((t_used, y))
        if len(hits) >= 2:
            d = math.hypot(
                hits[-1][1][0] - hits[-2][1][0], hits[-1][1][1] - hits[-2][1][1]
            )
            dists.append(d)
        if e_plus is not None and len(hits) >= 4:
            de = math.hypot(y[0] - e_plus[0], y[1] - e_plus[1])
            if de < max(1e-7, 1e-4 * scale) and dists[-1] < dists[0] * 0.5:
                raise NoCycleFound("returns collapse onto the e+ equilibrium")
        if len(hits) >= 3 and dists[-1] < return_tol:
            T_prev = hits[-2][0] - hits[-3][0]
            T_last = hits[-1][0] - hits[-2][0]
            if abs(T_last - T_prev) <= period_rtol * abs(T_last):
                return _measure_cycle(
                    pp, rhs, hits[-1][1], T_last, want_stable, n_dense, eta
                )
        # Aitken acceleration for slowly locking (near-fold) cycles
        if len(dists) >= 4 and dists[-1] < 1e-5:
            r1 = dists[-1] / dists[-2]
            r2 = dists[-2] / dists[-3]
            if 0.05 < r1 < 0.995 and abs(r1 - r2) < 0.05 * r1:
                y_ex = tuple(
                    hits[-1][1][i]
                    + (hits[-1][1][i] - hits[-2][1][i]) * r1 / (1.0 - r1)
                    for i in range(2)
                )
                verified = _verify_cycle_point(
                    pp, rhs, y_ex, hits[-1][0] - hits[-2][0], eta, tol, return_tol
                )
                if verified is not None:
                    y_cyc, T_cyc = verified
                    return _measure_cycle(
                        pp, rhs, y_cyc, T_cyc, want_stable, n_dense, eta
                    )
    raise NoCycleFound(
        f"no converged cycle within {transient_factor:.0f} tau_w at (g={g}, I={I})"
    )


def _verify_cycle_point(pp, rhs, y_try, T_guess, eta, tol, return_tol):
    """Return (y, period) if y_try lies on a cycle to within return_tol.

    The candidate point is generally a hair off the section, so the orbit
    is rolled forward a quarter period with events disarmed before the
    first section hit is taken; the period is then measured hit-to-hit.
    """
    section = EventSpec(fn=lambda t, yy: yy[1] - eta * yy[0], direction=-1, terminal=True)
    max_step = max(pp.tau_s, pp.tau_w / 20.0)
    _, _, _, _, _, _, y_roll = integrate_raw(
        rhs, y_try, 0.25 * T_guess, rtol=tol, atol=1e-14,
        max_step=max_step, record=False,
    )
    y_prev = None
    y = y_roll
    for _ in range(4):
        _, _, _, _, status, t_end, y_end = integrate_raw(
            rhs, y, 3.0 * T_guess, rtol=tol, atol=1e-14,
            max_step=max_step, events=[section], record=False,
        )
        if status != "event":
            return None
        if y_prev is not None:
            d = math.hypot(y_end[0] - y_prev[0], y_end[1] - y_prev[1])
            if d < return_tol and t_end > 0.1 * T_guess:
                return y_end, t_end
        y_prev = y_end
        y = y_end
    return None


def _measure_cycle(pp, rhs, y_sec, period, stable, n_dense, eta):
    amp, h_min, n_cross, w_lo, w_hi = _dense_cycle_scan(pp, rhs, y_sec, period, n_dense)
    return LimitCycleSummary(
        amplitude_w=amp,
        period=period,
        stable=stable,
        nonsmooth=n_cross >= 2,
        section_point=MeanFieldState(y_sec[0], y_sec[1]),
        min_H=h_min,
        n_crossings=n_cross,
    )


def _dense_cycle_scan(pp, rhs, y_sec, period, n_dense):
    """Scan 1.15 periods densely: w extrema, refined min of H, crossings."""
    Hfn = make_switching_fn(pp)
    span = 1.15 * period
    step = span / n_dense
    times, ys, _, _, _, _, _ = integrate_raw(
        rhs, y_sec, span, rtol=1e-12, atol=1e-15, max_step=step, record=True,
    )
    w = ys[:, 1]
    hvals = np.array([Hfn(si, wi) for si, wi in zip(ys[:, 0], ys[:, 1])])
    # count manifold crossings within one period only
    in_period = times <= period
    hp = hvals[in_period]
    n_cross = int(np.sum(hp[:-1] * hp[1:] < 0.0))
    idx = int(np.argmin(hvals))
    h_min = _refine_min_H(pp, rhs, y_sec, times, idx, hvals, step)
    return float(w.max() - w.min()), float(h_min), n_cross, float(w.min()), float(w.max())


def _refine_min_H(pp, rhs, y_sec, times, idx, hvals, step):
    """Second-pass parabolic refinement of the minimum of H over the cycle."""
    Hfn = make_switching_fn(pp)
    t_lo = max(times[idx] - 2.0 * step, 0.0)
    # march (without recording) to the window, then sample finely
    if t_lo > 0.0:
        _, _, _, _, _, _, y0 = integrate_raw(
            rhs, y_sec, t_lo, rtol=1e-12, atol=1e-15, record=False,
        )
    else:
        y0 = y_sec
    win = 4.0 * step
    fine_step = win / 200.0
    t2, y2, _, _, _, _, _ = integrate_raw(
        rhs, y0, win, rtol=1e-12, atol=1e-15, max_step=fine_step, record=True,
    )
    h2 = np.array([Hfn(si, wi) for si, wi in zip(y2[:, 0], y2[:, 1])])
    j = int(np.argmin(h2))
    if j == 0 or j == len(h2) - 1:
        return float(h2[j])
    # parabola through the best triple
    ta, tb, tc = t2[j - 1], t2[j], t2[j + 1]
    fa, fb, fc = h2[j - 1], h2[j], h2[j + 1]
    denom = (tb - ta) * (fb - fc) - (tb - tc) * (fb - fa)
    if denom == 0.0:
        return float(fb)
    tv = tb - 0.5 * ((tb - ta) ** 2 * (fb - fc) - (tb - tc) ** 2 * (fb - fa)) / denom
    # quadratic fit value at the vertex
    l0 = (tv - tb) * (tv - tc) / ((ta - tb) * (ta - tc))
    l1 = (tv - ta) * (tv - tc) / ((tb - ta) * (tb - tc))
    l2 = (tv - ta) * (tv - tb) / ((tc - ta) * (tc - tb))
    return float(fa * l0 + fb * l1 + fc * l2)


def cycle_min_H(params: ModelParams, g: float, I: float, want_stable: bool,
                init_hint=None, tol: float = 1e-10):
    """Track the cycle at (g, I) and return (summary, min-over-period of H)."""
    summary = track_limit_cycle(
        params, g, I, want_stable=want_stable, init_hint=init_hint, tol=tol
    )
    return summary, summary.min_H


# ---------------------------------------------------------------------------
# grazing and saddle-node-of-limit-cycles detection

def grazing_point(
    params: ModelParams,
    g: float,
    I_bracket,
    want_stable: bool = False,
    h_tol: float = 1e-9,
    init_hint=None,
):
    """Bisect on I for tangency of the tracked cycle with the manifold.

    The cycle (the unstable Hopf cycle by default) is tracked at each
    trial current and the minimum of H over one period measured by dense
    sampling with parabolic refinement; bisection proceeds on its sign
    until |min H| < h_tol at the returned current.  The grazing is
    persistence type above I_rh and destruction type below.
    """
    dd, _ = _fns_or_raise(params)
    lo, hi = float(I_bracket[0]), float(I_bracket[1])
    hint = init_hint

    def min_h(I):
        nonlocal hint
        summary = track_limit_cycle(
            params, g, I, want_stable=want_stable, init_hint=hint
        )
        hint = summary.section_point
        return summary.min_H

    f_lo, f_hi = min_h(lo), min_h(hi)
    if f_lo * f_hi > 0.0:
        raise BracketInvalid(
            f"min H has the same sign at both ends: {f_lo:.3e}, {f_hi:.3e}"
        )
    I_mid, f_mid = lo, f_lo
    for _ in range(200):
        I_mid = 0.5 * (lo + hi)
        f_mid = min_h(I_mid)
        if abs(f_mid) < h_tol:
            break
        if f_mid * f_lo < 0.0:
            hi, f_hi = I_mid, f_mid
        else:
            lo, f_lo = I_mid, f_mid
        if hi - lo < 1e-14 * max(1.0, abs(hi)):
            break
    kind = GrazingKind.PERSISTENCE if I_mid > dd.I_rh else GrazingKind.DESTRUCTION
    return I_mid, kind


def snlc_point(
    params: ModelParams,
    g: float,
    I_bracket,
    I_tol: float = 1e-6,
    init_hint=None,
) -> float:
    """Bisect on existence of the stable non-smooth cycle.

    The cycle must exist at the lower bracket end and be absent at the
    upper end; returns the fold current to within I_tol.
    """
    lo, hi = float(I_bracket[0]), float(I_bracket[1])
    hint = init_hint

    def exists(I):
        nonlocal hint
        try:
            summary = track_limit_cycle(
                params, g, I, want_stable=True, init_hint=hint
            )
        except NoCycleFound:
            if hint is not None:
                # confirm with the default exterior start before declaring absence
                try:
                    summary = track_limit_cycle(params, g, I, want_stable=True)
                except NoCycleFound:
                    return False
                hint = summary.section_point
                return True
            return False
        hint = summary.section_point
        return True

    if not exists(lo):
        raise BracketInvalid(f"no stable cycle at the lower bracket end I = {lo}")
    if exists(hi):
        raise BracketInvalid(f"stable cycle still present at the upper end I = {hi}")
    while hi - lo > I_tol:
        mid = 0.5 * (lo + hi)
        if exists(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def global_grazing_point(
    params: ModelParams,
    g_bracket=None,
    g_tol: float = 1e-4,
) -> float:
    """Coupling at which the grazing bifurcation crosses I = I_rh.

    Found by bisection on the sign of min H of the unstable cycle tracked
    at I = I_rh exactly: for smaller g the cycle is still smooth there
    (grazing happens above I_rh), for larger g it has already crossed.  A
    cycle that can no longer be tracked counts as the crossed side.  This
    is the codimension-2 point where the BEB switches from SNIC type to a
    plain non-smooth fold; it lies beyond the Hopf re-intersection g-hat.
    """
    dd, _ = _fns_or_raise(params)
    if g_bracket is None:
        gh = g_hat(params)
        if gh is None:
            raise NoHopfRegime("no Hopf re-intersection; global grazing point undefined")
        g_bracket = (gh * 1.001, gh * 1.6)
    lo, hi = float(g_bracket[0]), float(g_bracket[1])
    hint = None

    def crossed(g):
        nonlocal hint
        try:
            summary = track_limit_cycle(
                params, g, dd.I_rh, want_stable=False, init_hint=hint
            )
        except NoCycleFound:
            hint = None
            return True
        hint = summary.section_point
        return summary.min_H < 0.0

    if crossed(lo):
        raise BracketInvalid(f"cycle already non-smooth at I_rh for g = {lo}")
    # expand upward until the crossed side is found
    while not crossed(hi):
        lo = hi
        hi *= 1.3
        if hi > 100.0 * dd.g_star:
            raise NonConvergence("no grazing alternation found while expanding g")
    while hi - lo > g_tol:
        mid = 0.5 * (lo + hi)
        if crossed(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# codimension-2 points and diagram assembly

def codim2_points(
    params: ModelParams,
    compute_global: bool = False,
    global_bracket=None,
) -> list:
    """Labeled codimension-2 (and -3) points on the line I = I_rh.

    Always includes the saddle-node BEB at (g*, I_rh) and, when
    gbar < g*, the Hopf BEB at (gbar, I_rh).  With ``compute_global`` the
    grazing-alternation point is located numerically.  When tau_w = tau_s
    the two analytic points merge into the codimension-3 point.
    """
    dd, _ = _fns_or_raise(params)
    pts = []
    tau_scale = max(params.tau_w, params.tau_s)
    if abs(params.tau_w - params.tau_s) <= 1e-12 * tau_scale:
        pts.append(CodimPoint("codim3_bt_on_manifold", dd.g_star, dd.I_rh))
        return pts
    pts.append(CodimPoint("saddle_node_beb", dd.g_star, dd.I_rh))
    if dd.g_bar < dd.g_star:
        pts.append(CodimPoint("hopf_beb", dd.g_bar, dd.I_rh))
    if compute_global:
        g_gc = global_grazing_point(params, g_bracket=global_bracket)
        pts.append(CodimPoint("global_grazing", g_gc, dd.I_rh))
    return pts


@dataclass
class DiagramOptions:
    n_points: int = 200          # samples per closed-form curve
    n_cycle_points: int = 6      # g samples for grazing / snlc curves
    compute_global: bool = True
    compute_cycles: bool = True
    g_tol_global: float = 1e-3
    snlc_I_tol: float = 1e-5


def assemble_diagram(
    params: ModelParams, g_grid, options: DiagramOptions | None = None
) -> BifurcationDiagram:
    """Run every curve and point computation and merge into one diagram.

    The closed-form curves are evaluated on the intersection of g_grid
    with their domains.  Grazing and saddle-node-of-limit-cycle curves are
    sampled at options.n_cycle_points couplings across the Hopf lobe.
    Component failures on the cycle curves are recorded per point and do
    not abort the rest of the diagram.
    """
    if options is None:
        options = DiagramOptions()
    dd, _ = _fns_or_raise(params)
    g_grid = list(g_grid)
    g_lo = min(g_grid) if g_grid else dd.g_star
    g_hi = max(g_grid) if g_grid else dd.g_star

    sn = []
    if g_grid and g_hi >= dd.g_star:
        sn = saddle_node_curve(
            params, (max(g_lo, dd.g_star), g_hi), options.n_points
        )
    hopf = []
    gh = None
    has_hopf = dd.g_bar < dd.g_star
    if has_hopf:
        gh = g_hat(params)
        if g_grid and g_hi >= dd.g_bar:
            hopf = [
                (g, I) for (g, I, _bt) in hopf_curve(
                    params, (max(g_lo, dd.g_bar), g_hi), options.n_points
                )
            ]

    grazing = []
    snlc = []
    if options.compute_cycles and has_hopf and g_grid:
        lobe_lo = dd.g_bar + 0.12 * (dd.g_star - dd.g_bar)
        lobe_hi = min(g_hi, (gh if gh is not None else g_hi))
        for g in np.linspace(lobe_lo, min(lobe_hi, g_hi), options.n_cycle_points):
            g = float(g)
            try:
                I_ah = I_ah_of_g(params, g)
                width = max(I_ah - dd.I_rh, 0.05 * abs(dd.I_rh))
                I_gr, _kind = grazing_point(
                    params, g, (I_ah + 0.02 * width, I_ah + 2.0 * width)
                )
                grazing.append((g, I_gr))
            except Exception as exc:  # noqa: BLE001 - per-point failure reporting
                grazing.append((g, math.nan))
                continue
            try:
                I_sn_lc = snlc_point(
                    params, g, (I_gr + 1e-5, I_gr + 2.0 * width),
                    I_tol=options.snlc_I_tol,
                )
                snlc.append((g, I_sn_lc))
            except Exception:
                snlc.append((g, math.nan))

    codim2 = codim2_points(params, compute_global=False)
    g_threshold = None
    if options.compute_global and has_hopf and gh is not None:
        try:
            g_threshold = global_grazing_point(params, g_tol=options.g_tol_global)
            codim2.append(CodimPoint("global_grazing", g_threshold, dd.I_rh))
        except Exception:
            pass

    segments = []
    if g_grid:
        bounds = [g_lo, dd.g_bar, dd.g_star]
        if g_threshold is not None:
            bounds.append(g_threshold)
        bounds.append(g_hi)
        bounds = sorted(b for b in bounds if g_lo <= b <= g_hi)
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b - a < 1e-12:
                continue
            mid = 0.5 * (a + b)
            try:
                seg = beb_classify(params, mid, g_hat=g_threshold)
            except Exception:
                seg = None
            segments.append((a, b, seg))

    codim3 = None
    tau_scale = max(params.tau_w, params.tau_s)
    if abs(params.tau_w - params.tau_s) <= 1e-12 * tau_scale:
        codim3 = dd.g_star

    return BifurcationDiagram(
        sn_curve=sn,
        hopf_curve=hopf,
        grazing_curve=grazing,
        snlc_curve=snlc,
        beb_segments=segments,
        codim2=codim2,
        codim3=codim3,
        I_rh=dd.I_rh,
        g_star=dd.g_star,
        g_bar=dd.g_bar,
        g_hat=gh,
    )
