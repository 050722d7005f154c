"""Equilibria of the mean-field systems and their linear classification.

Nontrivial equilibria lie on the ray w = eta*s and solve
s = lambda_s * sqrt(I - I*(s, eta*s)).  The weak-coupling expansion turns
this into the quadratic A2(g) s^2 + A1(g) s + A0 = 0 whose roots, in the
shifted coordinates beta = M(g)(g - g*) and I~ = (I - I_rh)/A2(g), are
s_pm = beta +- sqrt(beta^2 + I~).  The expansion is exact for the
Izhikevich model; an independent bracketed root solve of the exact scalar
equation is provided as a cross-check and as the general-model route.

The boundary equilibrium at the origin collides with the switching
manifold at I = I_rh; ``beb_classify`` names the four flavors of that
collision as a function of the coupling g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import (
    OnOrBelowManifold,
    RootFindingFailure,
    ThresholdUnavailable,
    UnsupportedModel,
)
from .meanfield import MeanFieldState
from .models import ModelKind, ModelParams, derive, switching_H, v_star

NONHYP_TOL = 1e-10
_BOUNDARY_TOL = 1e-14


class Branch(Enum):
    E0 = "e0"
    E_PLUS = "e+"
    E_MINUS = "e-"


class Reality(Enum):
    REAL = "real"
    VIRTUAL = "virtual"
    BOUNDARY = "boundary"


class StabilityKind(Enum):
    STABLE_NODE = "stable_node"
    STABLE_FOCUS = "stable_focus"
    UNSTABLE_NODE = "unstable_node"
    UNSTABLE_FOCUS = "unstable_focus"
    SADDLE = "saddle"
    NON_HYPERBOLIC = "non_hyperbolic"


class EqMode(Enum):
    WEAK_COUPLING = "weak_coupling"
    FULL_IZHIKEVICH = "full_izhikevich"
    FULL_NUMERIC = "full_numeric"


class BEBType(Enum):
    PERSISTENCE = "persistence"
    HOMOCLINIC_PERSISTENCE = "homoclinic_persistence"
    SNIC_BEB = "snic_beb"
    NONSMOOTH_SADDLE_NODE = "nonsmooth_saddle_node"


@dataclass(frozen=True)
class Equilibrium:
    point: MeanFieldState
    branch: Branch
    reality: Reality
    kind: StabilityKind | None = None


@dataclass(frozen=True)
class ReducedCoordinates:
    """Shifted parameters in which s_pm = beta +- sqrt(beta^2 + I~)."""

    beta: float
    I_tilde: float


def reduced_coordinates(params: ModelParams) -> ReducedCoordinates:
    dd, fns = derive(params)
    if fns is None:
        raise UnsupportedModel("weak-coupling coordinates are undefined for LIF")
    g = params.g
    return ReducedCoordinates(
        beta=fns.M(g) * (g - dd.g_star),
        I_tilde=(params.I - dd.I_rh) / fns.A2(g),
    )


def trivial_equilibrium(params: ModelParams) -> Equilibrium:
    """The non-firing solution e0 = (0, 0).

    Real (and a stable node) for I < I_rh, on the switching manifold at
    I = I_rh, virtual for I > I_rh.
    """
    dd, _ = derive(params)
    gap = params.I - dd.I_rh
    if abs(gap) <= _BOUNDARY_TOL:
        reality, kind = Reality.BOUNDARY, None
    elif gap < 0:
        reality, kind = Reality.REAL, StabilityKind.STABLE_NODE
    else:
        reality, kind = Reality.VIRTUAL, None
    return Equilibrium(MeanFieldState(0.0, 0.0), Branch.E0, reality, kind)


def _weak_coupling_roots(params: ModelParams):
    dd, fns = derive(params)
    if fns is None:
        raise UnsupportedModel("the weak-coupling expansion requires F'' > 0")
    rc = reduced_coordinates(params)
    disc = rc.beta**2 + rc.I_tilde
    if disc < 0.0:
        return dd, []
    root = math.sqrt(disc)
    return dd, [(Branch.E_PLUS, rc.beta + root), (Branch.E_MINUS, rc.beta - root)]


def _full_izhikevich_roots(params: ModelParams):
    # written from the exact Izhikevich algebra, independent of the
    # coefficient-function plumbing
    if params.kind is not ModelKind.IZHIKEVICH:
        raise UnsupportedModel("closed-form equilibria require the Izhikevich model")
    k = params.rate_k
    lam_s = params.tau_s * params.s_jump * k
    eta = (params.tau_w * params.w_jump) / (params.tau_s * params.s_jump)
    g = params.g
    a2 = 1.0 / lam_s**2 + g * g / 4.0
    a1 = eta - g * (params.e_r - params.alpha / 2.0)
    i_rh = params.alpha**2 / 4.0
    disc = a1 * a1 + 4.0 * (params.I - i_rh) * a2
    dd, _ = derive(params)
    if disc < 0.0:
        return dd, []
    root = math.sqrt(disc)
    return dd, [
        (Branch.E_PLUS, (-a1 + root) / (2.0 * a2)),
        (Branch.E_MINUS, (-a1 - root) / (2.0 * a2)),
    ]


def _full_numeric_roots(params: ModelParams, n_scan: int = 2000):
    dd, _ = derive(params)
    lam = dd.lambda_s
    eta = dd.eta

    def resid(s):
        return (s / lam) ** 2 - switching_H(params, s, eta * s)

    s_max = lam * math.sqrt(params.I + abs(dd.I_rh) + 1.0)
    grid = np.linspace(0.0, s_max, n_scan + 1)
    vals = np.array([resid(s) for s in grid])
    roots = []
    for i in range(n_scan):
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0 and a > 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            try:
                roots.append(brentq(resid, a, b, xtol=1e-15, rtol=8.9e-16))
            except (RuntimeError, ValueError) as exc:
                raise RootFindingFailure(f"bracketed solve failed on [{a}, {b}]") from exc
    roots = sorted(r for r in roots if r > _BOUNDARY_TOL)
    if len(roots) > 2:
        raise RootFindingFailure(f"found {len(roots)} equilibrium roots, expected <= 2")
    labeled = []
    if len(roots) == 1:
        labeled.append((Branch.E_PLUS, roots[0]))
    elif len(roots) == 2:
        labeled.append((Branch.E_MINUS, roots[0]))
        labeled.append((Branch.E_PLUS, roots[1]))
    return dd, labeled


def nontrivial_equilibria(
    params: ModelParams, mode: EqMode = EqMode.WEAK_COUPLING
) -> list[Equilibrium]:
    """Nontrivial equilibria (s, eta*s) with s >= 0, classified.

    Roots with s < 0 are not valid equilibria (s is a gating mean) and are
    dropped; a root at s = 0 coincides with the boundary equilibrium and
    is reported with reality BOUNDARY.
    """
    if mode is EqMode.WEAK_COUPLING:
        dd, pairs = _weak_coupling_roots(params)
    elif mode is EqMode.FULL_IZHIKEVICH:
        dd, pairs = _full_izhikevich_roots(params)
    else:
        dd, pairs = _full_numeric_roots(params)
    out = []
    for branch, s in pairs:
        if s < -_BOUNDARY_TOL:
            continue
        reality = Reality.BOUNDARY if abs(s) <= _BOUNDARY_TOL else Reality.REAL
        s = max(s, 0.0)
        eq = Equilibrium(MeanFieldState(s, dd.eta * s), branch, reality)
        if reality is Reality.REAL:
            eq = classify(params, eq)
        out.append(eq)
    return out


def jacobian(params: ModelParams, at) -> np.ndarray:
    """Jacobian of the reduced mean field at an interior point (H > 0).

    Uses the exact partials of the rheobase surface, dI*/dw = 1 and
    dI*/ds = -g (e_r - v*(s)); at an equilibrium sqrt(H) = s / lambda_s
    recovers the simplified steady-state form.
    """
    s, w = (at.s, at.w) if isinstance(at, MeanFieldState) else (at[0], at[1])
    h = switching_H(params, s, w)
    if h <= 0.0:
        raise OnOrBelowManifold(f"H = {h:.3e} <= 0 at (s, w) = ({s}, {w})")
    dd, _ = derive(params)
    sq = math.sqrt(h)
    dIs = -params.g * (params.e_r - v_star(params, s))
    return np.array(
        [
            [-1.0 / params.tau_s - dd.s_amp * dIs / (2 * sq), -dd.s_amp / (2 * sq)],
            [-dd.w_amp * dIs / (2 * sq), -1.0 / params.tau_w - dd.w_amp / (2 * sq)],
        ]
    )


def trace_det(params: ModelParams, at) -> tuple[float, float]:
    jac = jacobian(params, at)
    return float(jac[0, 0] + jac[1, 1]), float(np.linalg.det(jac))


def classify(params: ModelParams, eq: Equilibrium) -> Equilibrium:
    """Fill in the linear stability kind of a real equilibrium."""
    if eq.branch is Branch.E0:
        kind = StabilityKind.STABLE_NODE if eq.reality is Reality.REAL else None
        return replace(eq, kind=kind)
    if eq.reality is not Reality.REAL:
        return eq
    tr, det = trace_det(params, eq.point)
    if abs(det) <= NONHYP_TOL or abs(tr) <= NONHYP_TOL:
        kind = StabilityKind.NON_HYPERBOLIC
    elif det < 0.0:
        kind = StabilityKind.SADDLE
    else:
        focus = tr * tr - 4.0 * det < 0.0
        if tr < 0.0:
            kind = StabilityKind.STABLE_FOCUS if focus else StabilityKind.STABLE_NODE
        else:
            kind = StabilityKind.UNSTABLE_FOCUS if focus else StabilityKind.UNSTABLE_NODE
    return replace(eq, kind=kind)


def beb_classify(
    params: ModelParams, g: float, g_hat: float | None = None
) -> BEBType:
    """Classify the boundary equilibrium bifurcation at I = I_rh for coupling g.

    When g-bar < g*: persistence below g-bar, homoclinic persistence up to
    g*, then SNIC up to the numerically computed grazing-alternation
    threshold, and a plain non-smooth saddle-node beyond it.  The
    threshold (the g where the grazing curve crosses I = I_rh, past the
    second Hopf intersection g-hat) must be supplied by the caller; it is
    produced by the bifurcation module's codimension-2 search.  When
    g* <= g-bar there are no cycles: persistence below g*, non-smooth
    saddle-node above.
    """
    dd, _ = derive(params)
    if dd.g_bar < dd.g_star:
        if g < dd.g_bar:
            return BEBType.PERSISTENCE
        if g < dd.g_star:
            return BEBType.HOMOCLINIC_PERSISTENCE
        if g_hat is None:
            raise ThresholdUnavailable(
                "classifying g > g* needs the computed SNIC/fold threshold"
            )
        return BEBType.SNIC_BEB if g < g_hat else BEBType.NONSMOOTH_SADDLE_NODE
    if g < dd.g_star:
        return BEBType.PERSISTENCE
    return BEBType.NONSMOOTH_SADDLE_NODE


def slow_network_eigenvalue(params: ModelParams, branch: Branch) -> float:
    """Eigenvalue of w_pm in the scalar mean field of the slow network.

    The slow network slaves s to w/eta, leaving dw/dt = -w/tau_w +
    w_amp * sqrt(I - I*(w/eta, w)).  Differentiating at the steady state
    gives

        lambda(w_pm) = -(lambda_s^2 A2(g) / tau_w) (1 - beta / s_pm)

    so w_plus is always stable and w_minus always unstable, mirroring the
    determinant signs of the two-dimensional system.
    """
    dd, fns = derive(params)
    if fns is None:
        raise UnsupportedModel("slow-network eigenvalue needs the weak-coupling form")
    rc = reduced_coordinates(params)
    disc = rc.beta**2 + rc.I_tilde
    if disc < 0.0:
        raise RootFindingFailure("no nontrivial steady state at these parameters")
    root = math.sqrt(disc)
    s = rc.beta + root if branch is Branch.E_PLUS else rc.beta - root
    if s <= 0.0:
        raise RootFindingFailure(f"branch {branch.value} has s = {s:.3e} <= 0")
    g = params.g
    return -(dd.lambda_s**2 * fns.A2(g) / params.tau_w) * (1.0 - rc.beta / s)
