"""Catalog of two-dimensional adapting integrate-and-fire neuron models.

Each model is defined by a membrane nonlinearity F(v); the four supported
choices are

    LIF         F(v) = -v / tau_m
    Izhikevich  F(v) = v (v - alpha)
    AdEx        F(v) = exp(v) - v
    Quartic     F(v) = v^4 - 2 a v

All closed-form quantities used elsewhere in the package derive from F:
the minimizing voltage v*(s), the state-dependent rheobase I*(s, w), the
switching function H = I - I*, the population firing rates (closed form
where available, adaptive quadrature otherwise), and the weak-coupling
coefficient functions that feed the equilibrium and bifurcation formulas.

Everything here is a pure function of immutable parameter objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from scipy.integrate import quad

from .errors import QuadratureFailure, UnsupportedModel

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

# Below this margin the firing side is treated as exactly on the manifold,
# which pins the quiescent branch of the rate deterministically.
H_SNAP = 1e-14

_PRESET_DIR = Path(__file__).parent / "presets"


class ModelKind(str, Enum):
    LIF = "lif"
    IZHIKEVICH = "izhikevich"
    ADEX = "adex"
    QUARTIC = "quartic"


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless constants of one neuron model plus its network coupling.

    ``s_jump`` and ``w_jump`` are the raw per-spike increments of the
    synaptic gating and adaptation variables (the network simulator uses
    them as-is).  ``rate_scale`` is the constant k of the square-root rate
    surrogate k*sqrt(I - I*); it defaults to the global Izhikevich fit 1/2
    for that model and to the type-I normal-form value 1/pi otherwise, and
    is absorbed into the effective jump amplitudes wherever the reduced
    mean field is analyzed.
    """

    kind: ModelKind
    g: float                      # coupling strength
    I: float                      # applied current
    tau_s: float                  # synaptic time constant
    tau_w: float                  # adaptation time constant
    s_jump: float                 # per-spike synaptic increment (s-hat)
    w_jump: float                 # per-spike adaptation increment (w-hat)
    e_r: float                    # synaptic reversal potential
    v_peak: float
    v_reset: float
    alpha: float | None = None    # Izhikevich only
    a_quartic: float | None = None  # quartic only
    tau_m: float | None = None    # LIF only
    a_adapt: float | None = None  # adaptation rate a; defaults to 1/tau_w
    b_adapt: float = 0.0          # adaptation voltage coupling b
    rate_scale: float | None = None

    def __post_init__(self):
        if not isinstance(self.kind, ModelKind):
            object.__setattr__(self, "kind", ModelKind(str(self.kind).lower()))
        for name in ("tau_s", "tau_w", "s_jump", "w_jump"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.g < 0:
            raise ValueError("g must be nonnegative")
        if self.v_reset >= self.v_peak:
            raise ValueError("v_reset must be below v_peak")
        if self.kind is ModelKind.IZHIKEVICH and self.alpha is None:
            raise ValueError("Izhikevich model requires alpha")
        if self.kind is ModelKind.QUARTIC and (
            self.a_quartic is None or self.a_quartic <= 0
        ):
            raise ValueError("quartic model requires a_quartic > 0")
        if self.kind is ModelKind.LIF and (self.tau_m is None or self.tau_m <= 0):
            raise ValueError("LIF model requires tau_m > 0")
        if self.a_adapt is None:
            object.__setattr__(self, "a_adapt", 1.0 / self.tau_w)
        if self.a_adapt <= 0:
            raise ValueError("a_adapt must be positive")
        if self.e_r <= v_star(self, 0.0):
            raise ValueError("e_r must exceed v*(0); the synapse must be excitatory")

    @property
    def rate_k(self) -> float:
        if self.rate_scale is not None:
            return self.rate_scale
        return 0.5 if self.kind is ModelKind.IZHIKEVICH else 1.0 / math.pi

    def with_(self, **kwargs) -> "ModelParams":
        """Copy with selected fields replaced."""
        return replace(self, **kwargs)


def f_of_v(params: ModelParams, v: float) -> float:
    """Membrane nonlinearity F(v) of the bound model."""
    k = params.kind
    if k is ModelKind.LIF:
        return -v / params.tau_m
    if k is ModelKind.IZHIKEVICH:
        return v * (v - params.alpha)
    if k is ModelKind.ADEX:
        return math.exp(v) - v
    return v**4 - 2.0 * params.a_quartic * v


def f_prime(params: ModelParams, v: float) -> float:
    k = params.kind
    if k is ModelKind.LIF:
        return -1.0 / params.tau_m
    if k is ModelKind.IZHIKEVICH:
        return 2.0 * v - params.alpha
    if k is ModelKind.ADEX:
        return math.exp(v) - 1.0
    return 4.0 * v**3 - 2.0 * params.a_quartic


def f_second(params: ModelParams, v: float) -> float:
    k = params.kind
    if k is ModelKind.LIF:
        return 0.0
    if k is ModelKind.IZHIKEVICH:
        return 2.0
    if k is ModelKind.ADEX:
        return math.exp(v)
    return 12.0 * v**2


def v_star(params: ModelParams, s: float) -> float:
    """Voltage minimizing G(v, s, w) = F(v) - w + I + g s (e_r - v).

    Solves F'(v*) = g s in closed form.  For the LIF model F is concave,
    so the minimum sits at the right endpoint v_peak regardless of s.
    """
    gs = params.g * s
    k = params.kind
    if k is ModelKind.LIF:
        return params.v_peak
    if k is ModelKind.IZHIKEVICH:
        return 0.5 * (params.alpha + gs)
    if k is ModelKind.ADEX:
        return math.log1p(gs)
    return ((gs + 2.0 * params.a_quartic) / 4.0) ** (1.0 / 3.0)


def rheobase_surface(params: ModelParams, s: float, w: float) -> float:
    """State-dependent rheobase I*(s, w).

    The network at (s, w) fires iff I > I*(s, w).  Defined by the minimum
    of G over [v_reset, v_peak]:

        I*(s, w) = w - F(v*(s)) - g s (e_r - v*(s))

    which reproduces the per-model closed forms (e.g. w - g s e_r +
    (alpha + g s)^2 / 4 for Izhikevich) and satisfies I*(0, 0) = I_rh.
    """
    vs = v_star(params, s)
    return w - f_of_v(params, vs) - params.g * s * (params.e_r - vs)


def switching_H(params: ModelParams, s: float, w: float) -> float:
    """Switching function H = I - I*(s, w); H = 0 is the switching manifold."""
    return params.I - rheobase_surface(params, s, w)


def firing_rate_reduced(
    params: ModelParams, s: float, w: float, k: float | None = None
) -> float:
    """Square-root firing-rate surrogate k*sqrt(H) on the firing side, 0 otherwise."""
    if k is None:
        k = params.rate_k
    h = switching_H(params, s, w)
    if h <= H_SNAP:
        return 0.0
    return k * math.sqrt(h)


def _izhikevich_rate(params: ModelParams, s: float, w: float, h: float) -> float:
    # G is a shifted parabola: G(v) = (v - v*)^2 + H, so the rate integral
    # reduces to a difference of arctangents.
    vs = v_star(params, s)
    rt = math.sqrt(h)
    span = math.atan((params.v_peak - vs) / rt) - math.atan((params.v_reset - vs) / rt)
    return rt / span


def _lif_rate(params: ModelParams, s: float, w: float) -> float:
    mu = 1.0 / params.tau_m + params.g * s
    c = params.I + params.g * s * params.e_r - w
    return mu / math.log((c - mu * params.v_reset) / (c - mu * params.v_peak))


def firing_rate_full(params: ModelParams, s: float, w: float) -> float:
    """Mean firing rate of the full mean field: reciprocal of int dv / G.

    Closed form for LIF and Izhikevich.  For AdEx and quartic the integral
    is evaluated by adaptive quadrature split at the near-singular minimum
    v*(s), since G(v*) = H -> 0+ on approach to the manifold.
    """
    h = switching_H(params, s, w)
    if h <= H_SNAP:
        return 0.0
    kind = params.kind
    if kind is ModelKind.IZHIKEVICH:
        return _izhikevich_rate(params, s, w, h)
    if kind is ModelKind.LIF:
        return _lif_rate(params, s, w)

    g, e_r, I = params.g, params.e_r, params.I

    def integrand(v):
        return 1.0 / (f_of_v(params, v) - w + I + g * s * (e_r - v))

    vs = v_star(params, s)
    lo, hi = params.v_reset, params.v_peak
    pieces = [(lo, vs), (vs, hi)] if lo < vs < hi else [(lo, hi)]
    total = 0.0
    for a, b in pieces:
        val, err = quad(integrand, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)
        if not math.isfinite(val) or err > 1e-10 * max(1.0, abs(val)):
            raise QuadratureFailure(
                f"rate integral error {err:.2e} on [{a}, {b}] at s={s}, w={w}"
            )
        total += val
    return 1.0 / total


def discontinuity_window(params: ModelParams) -> tuple[float, float]:
    """Interval of g*s where the full Izhikevich rate vanishes at the manifold.

    Inside (2 v_reset - alpha, 2 v_peak - alpha) the full model has the
    same order of discontinuity as the square-root surrogate, so the
    reduced model is a trustworthy stand-in there.
    """
    if params.kind is not ModelKind.IZHIKEVICH:
        raise UnsupportedModel("discontinuity window is specific to the Izhikevich model")
    return (2.0 * params.v_reset - params.alpha, 2.0 * params.v_peak - params.alpha)


@dataclass(frozen=True)
class DerivedParams:
    """Constants derived from one parameter set.

    ``s_amp`` and ``w_amp`` are the effective jump amplitudes k*s_jump and
    k*w_jump of the reduced mean field (the rate constant k is absorbed
    there, as it only rescales the jumps).  lambda_s = tau_s * s_amp and
    lambda_w = tau_w * w_amp; eta, g_star and g_bar are independent of k.
    For the LIF model v_star_prime_0 is None and the weak-coupling
    machinery is unavailable (F'' = 0).
    """

    lambda_s: float
    lambda_w: float
    eta: float
    I_rh: float
    v_star_0: float
    v_star_prime_0: float | None
    g_star: float
    g_bar: float
    s_amp: float
    w_amp: float
    gamma: float  # tau_s / tau_w; quiescent trajectories follow w = C s^gamma


@dataclass(frozen=True)
class CoefficientFns:
    """Weak-coupling coefficient functions of g.

    The nontrivial equilibria solve A2(g) s^2 + A1(g) s + A0 = 0, and the
    trace factorization supplies N(g) with 0 < N(g) < M(g) for all g.
    """

    A2: object
    A1: object
    A0: float
    M: object
    N: object


def derive(params: ModelParams) -> tuple[DerivedParams, CoefficientFns | None]:
    """Compute DerivedParams and CoefficientFns for one parameter set.

    The expansion underlying the coefficient functions is exact for the
    Izhikevich model and first-order in g*s otherwise.  Returns None in
    place of CoefficientFns for LIF, whose F'' vanishes.
    """
    k = params.rate_k
    s_amp = k * params.s_jump
    w_amp = k * params.w_jump
    lam_s = params.tau_s * s_amp
    lam_w = params.tau_w * w_amp
    eta = lam_w / lam_s
    v0 = v_star(params, 0.0)
    I_rh = -f_of_v(params, v0)
    drive = params.e_r - v0
    fpp = f_second(params, v0)
    vp0 = None if params.kind is ModelKind.LIF else 1.0 / fpp
    derived = DerivedParams(
        lambda_s=lam_s,
        lambda_w=lam_w,
        eta=eta,
        I_rh=I_rh,
        v_star_0=v0,
        v_star_prime_0=vp0,
        g_star=eta / drive,
        g_bar=w_amp / (s_amp * drive),
        s_amp=s_amp,
        w_amp=w_amp,
        gamma=params.tau_s / params.tau_w,
    )
    if vp0 is None:
        return derived, None

    inv_lam2 = 1.0 / lam_s**2
    rate_sum = 1.0 / params.tau_s + 1.0 / params.tau_w
    n_num = lam_s * s_amp * drive / 2.0

    def A2(g):
        return inv_lam2 + vp0 * g * g / 2.0

    def A1(g):
        return eta - g * drive

    def M(g):
        return drive / (2.0 * A2(g))

    def N(g):
        return n_num / (rate_sum + lam_s * s_amp * g * g * vp0 / 2.0)

    fns = CoefficientFns(A2=A2, A1=A1, A0=I_rh - params.I, M=M, N=N)
    return derived, fns


# ---------------------------------------------------------------------------
# parameter file I/O

_FIELD_NAMES = {
    "kind", "g", "I", "tau_s", "tau_w", "s_jump", "w_jump", "e_r",
    "v_peak", "v_reset", "alpha", "a_quartic", "tau_m", "a_adapt",
    "b_adapt", "rate_scale",
}


def params_from_dict(data: dict) -> ModelParams:
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ValueError(f"unknown model parameter keys: {sorted(unknown)}")
    if "kind" not in data:
        raise ValueError("model file must set 'kind'")
    return ModelParams(**data)


def load_params(path: str | Path) -> ModelParams:
    """Load ModelParams from a TOML or JSON file keyed by field name."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    return params_from_dict(data)


def preset(name: str) -> ModelParams:
    """Load one of the bundled parameter sets: izhikevich, adex, quartic."""
    path = _PRESET_DIR / f"{name}.toml"
    if not path.exists():
        raise ValueError(f"no preset named {name!r}; have {preset_names()}")
    return load_params(path)


def preset_names() -> list[str]:
    return sorted(p.stem for p in _PRESET_DIR.glob("*.toml"))
