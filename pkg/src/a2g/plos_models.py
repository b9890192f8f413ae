"""Analytical line-of-sight probability models for air-to-ground links.

Every model returns a probability clamped to [0, 1].  Pass ``clamp=False``
to get the raw evaluation instead; tests use it to check that clamping never
hides a value that is really out of range.

Angles are in degrees at this interface.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.special import erf, erfcx

from .env_grid import Environment, LinkGeometry, derive_dimensions, env_id_of, lattice_crossings
from .tables import load_table, opt_float

SPEED_OF_LIGHT = 299_792_458.0

# Ray heights beyond this many gamma are treated as clearing every building.
_HEIGHT_CUTOFF_SIGMAS = 9.0


class PlosModelId(str, enum.Enum):
    ITU = "itu"
    SIGMOID = "sigmoid"
    FRESNEL = "fresnel"
    SCURVE3 = "scurve3"
    FIRST_BUILDING = "first_building"
    REGION3D = "region3d"
    GPP3 = "gpp3"
    CYLINDER = "cylinder"

    @classmethod
    def parse(cls, text: str) -> "PlosModelId":
        key = text.strip().lower().replace("-", "_")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown P_LoS model {text!r}")


class SigmoidFitError(RuntimeError):
    """Raised when the sigmoid fit is degenerate or does not converge."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (rms residual {residual:.4g})")
        self.residual = residual


def _clamp(value, clamp: bool):
    if not clamp:
        return value
    if np.ndim(value):
        return np.clip(value, 0.0, 1.0)
    return min(1.0, max(0.0, float(value)))


def _rayleigh_clear(h, gamma):
    """P(building height < h) for Rayleigh(gamma) heights."""
    return -np.expm1(-np.square(h) / (2.0 * gamma * gamma))


def n_obstructing(env: Environment, r: float) -> int:
    """Number of obstructing buildings ``floor(r*sqrt(alpha*beta) - 1)``, r in meters.

    ``beta`` is per square kilometre, so the distance enters in kilometres.
    """
    return math.floor(r / 1000.0 * math.sqrt(env.alpha * env.beta) - 1.0)


# ---------------------------------------------------------------------------
# ITU, Fresnel-corrected ITU


def plos_itu(env: Environment, r: float, h_tx: float, h_rx: float = 1.5, *, clamp=True) -> float:
    """ITU product over the ``m + 1`` buildings sampled at their midpoints."""
    if h_tx <= h_rx or h_rx < 0:
        raise ValueError("requires h_tx > h_rx >= 0")
    m = n_obstructing(env, r) if r > 0 else -1
    if m < 0:
        return 1.0
    n = np.arange(m + 1)
    h_ray = h_tx - (n + 0.5) * (h_tx - h_rx) / (m + 1)
    return _clamp(float(np.prod(_rayleigh_clear(h_ray, env.gamma))), clamp)


def plos_fresnel(
    env: Environment,
    r: float,
    h_tx: float,
    h_rx: float,
    wavelength: float,
    *,
    clamp=True,
) -> float:
    """ITU model with the first-Fresnel-zone clearance subtracted from each ray height.

    Building ``i`` sits at ``d_i = (i + 1/2) r / (m + 1)`` from the TX, the
    same midpoint sampling as the ITU product, and the TX-RX distance in the
    height interpolation is the horizontal distance ``r``.
    """
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    if h_tx <= h_rx or h_rx < 0:
        raise ValueError("requires h_tx > h_rx >= 0")
    m = n_obstructing(env, r) if r > 0 else -1
    if m < 0:
        return 1.0
    dh = h_tx - h_rx
    d = (np.arange(m + 1) + 0.5) * r / (m + 1)
    clearance = math.sqrt(wavelength * r) * np.minimum(d, r - d) / math.hypot(r, dh)
    margin = h_tx - d * dh / r - clearance
    value = np.prod(-np.expm1(-np.square(margin) / (2.0 * env.gamma**2)))
    return _clamp(float(value), clamp)


# ---------------------------------------------------------------------------
# Elevation-only S-curves


def plos_sigmoid(a: float, b: float, theta, *, clamp=True):
    """Two-parameter sigmoid ``1 / (1 + a exp(-b (theta - a)))``."""
    if not a > 0:
        raise ValueError("sigmoid parameter a must be positive")
    theta = np.asarray(theta, dtype=float)
    z = -b * (theta - a)
    value = 1.0 / (1.0 + a * np.exp(np.minimum(z, 700.0)))
    return _clamp(value if value.ndim else float(value), clamp)


@dataclass(frozen=True)
class SigmoidFit:
    a: float
    b: float
    rmse: float


def fit_sigmoid(theta_grid: Sequence[float], reference_curve: Sequence[float]) -> SigmoidFit:
    """Least-squares (a, b) for the two-parameter sigmoid, both constrained positive.

    The fit is started from a fixed set of initial points and the best local
    optimum is kept, so the result is deterministic.

    Raises:
        ValueError: fewer than 8 grid points or less than 40 degrees of span.
        SigmoidFitError: saturated (near-constant) reference or no start
            converged.
    """
    theta = np.asarray(theta_grid, dtype=float)
    ref = np.asarray(reference_curve, dtype=float)
    if theta.shape != ref.shape or theta.ndim != 1:
        raise ValueError("theta_grid and reference_curve must be 1-D and equally long")
    if theta.size < 8 or np.ptp(theta) < 40.0:
        raise ValueError("need at least 8 grid points spanning 40 degrees")
    if np.ptp(ref) < 1e-6:
        resid = float(np.sqrt(np.mean((ref - ref.mean()) ** 2)))
        raise SigmoidFitError("reference curve is constant; (a, b) is not identifiable", resid)

    def residual(x):
        return plos_sigmoid(x[0], x[1], theta, clamp=False) - ref

    best = None
    for a0 in (1.0, 5.0, 10.0, 30.0):
        for b0 in (0.05, 0.2, 0.5):
            sol = least_squares(
                residual,
                x0=[a0, b0],
                bounds=([1e-9, 1e-9], [np.inf, np.inf]),
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=2000,
            )
            if sol.status > 0 and (best is None or sol.cost < best.cost):
                best = sol
    if best is None:
        raise SigmoidFitError("no start converged", float("nan"))
    rmse = float(np.sqrt(np.mean(best.fun**2)))
    return SigmoidFit(float(best.x[0]), float(best.x[1]), rmse)


@lru_cache(maxsize=None)
def _scurve_table():
    return {
        row["env_id"]: tuple(float(row[k]) for k in ("a", "b", "c", "d"))
        for row in load_table("scurve3.csv")
    }


def scurve3_coefficients(env_id: str) -> Tuple[float, float, float, float]:
    try:
        return _scurve_table()[env_id]
    except KeyError:
        raise KeyError(f"no S-curve coefficients for environment {env_id!r}") from None


def plos_scurve3(env_id: str, theta, *, clamp=True):
    """Cubic-exponent S-curve with the tabulated per-environment coefficients."""
    a, b, c, d = scurve3_coefficients(env_id)
    t = np.asarray(theta, dtype=float)
    if np.any(t <= 0) or np.any(t > 90):
        raise ValueError("theta must lie in (0, 90]")
    value = 1.0 / (1.0 + np.exp(((a * t + b) * t + c) * t + d))
    return _clamp(value if value.ndim else float(value), clamp)


# ---------------------------------------------------------------------------
# First obstructing building


def first_building_rate(env: Environment) -> float:
    """Rate of the exponential distance to the first building, per meter."""
    w, s = derive_dimensions(env)
    q = s / w
    lam = (613 / 753 - 901 / 2116 * q + 1258 / 8477 * q**2 - 239 / 10712 * q**3) / s
    if lam <= 0:
        raise ValueError(f"S/W = {q:.4g} gives a non-positive first-building rate")
    return lam


def plos_first_building(env: Environment, r: float, h_tx: float, *, clamp=True) -> float:
    """LoS probability when only the first building (at exponential distance) can block.

    Equals ``1 - int_0^r lam exp(-lam x) exp(-rho x^2) dx`` with
    ``rho = h_tx^2 / (2 gamma^2 r^2)``; evaluated through ``erfcx`` so the
    ``exp(lam^2 / 4 rho)`` prefactor cannot overflow.
    """
    if not (r > 0 and h_tx > 0):
        raise ValueError("requires r > 0 and h_tx > 0")
    lam = first_building_rate(env)
    rho = h_tx**2 / (2.0 * env.gamma**2 * r**2)
    sq = math.sqrt(rho)
    lo = lam / (2.0 * sq)
    hi = (2.0 * rho * r + lam) / (2.0 * sq)
    # exp(lo^2) * (erf(hi) - erf(lo)) = erfcx(lo) - erfcx(hi) * exp(lo^2 - hi^2)
    bracket = erfcx(lo) - erfcx(hi) * math.exp(lo * lo - hi * hi)
    value = 1.0 - lam * math.sqrt(math.pi) / (2.0 * sq) * bracket
    return _clamp(value, clamp)


# ---------------------------------------------------------------------------
# Region-based 3D model


def single_building_plos(h_min, h_max, gamma, *, normalization: str = "printed"):
    """LoS probability past one building whose ray height spans [h_min, h_max].

    ``printed`` divides the Rayleigh-tail integral by ``h_max``;
    ``interval`` divides by ``h_max - h_min`` (the mean of the Rayleigh CDF
    over the interval).  They coincide when ``h_min = 0``.
    """
    h_min = np.asarray(h_min, dtype=float)
    h_max = np.asarray(h_max, dtype=float)
    tail = math.sqrt(math.pi / 2.0) * gamma * (
        erf(h_max / (math.sqrt(2.0) * gamma)) - erf(h_min / (math.sqrt(2.0) * gamma))
    )
    if normalization == "printed":
        denom = h_max
    elif normalization == "interval":
        denom = h_max - h_min
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, tail / denom, 1.0)
    # zero-width interval at h: the building blocks with the Rayleigh tail probability
    degenerate = (denom <= 0) & (h_max > 0)
    ratio = np.where(degenerate, np.exp(-np.square(h_max) / (2 * gamma**2)), ratio)
    return 1.0 - ratio


REGIONS = ("R1", "R2", "R3")


def _region_users(w: float, s: float, region: str, n_side: int) -> np.ndarray:
    u = (np.arange(n_side) + 0.5) / n_side
    a, b = np.meshgrid(u, u, indexing="ij")
    a, b = a.ravel(), b.ravel()
    if region == "R1":
        return np.column_stack([a * w, w + b * s])
    if region == "R2":
        return np.column_stack([w + a * s, b * w])
    if region == "R3":
        return np.column_stack([w + a * s, w + b * s])
    raise ValueError(f"unknown region {region!r}")


@lru_cache(maxsize=4096)
def _region_kappas(w, s, phi_deg, region, n_side, s_max, kappa_rule, swap_sw):
    """Per-user ``(kappa1, kappa2)`` sequences along azimuth ``phi``.

    For each user the ray is traced backwards to the exit of the last
    building behind it; that exit starts the street gap the user stands in.
    Distances are measured from there, so ``kappa2_i`` is where building
    ``i`` begins.  ``user_gap`` takes ``kappa1_i = kappa2_i - S'_1`` (the
    spread of the user position over its own gap); ``local_gap`` takes
    ``kappa1_i`` at the start of the gap directly in front of building ``i``.
    On an axis-aligned ray both give ``kappa1_i = (i-1)(S+W)``,
    ``kappa2_i = kappa1_i + S``.  ``swap_sw`` uses the building's own
    crossing interval seen from the user instead.
    """
    pitch = w + s
    users = _region_users(w, s, region, n_side)
    ph = math.radians(phi_deg)
    direction = (math.cos(ph), math.sin(ph))
    s_back = 64.0 * pitch
    entry, exit_, _, _ = lattice_crossings(w, pitch, users, direction, -s_back, s_max)
    behind = np.isfinite(exit_) & (exit_ <= 0.0)
    ahead = np.isfinite(entry) & (entry >= 0.0)
    start = np.where(behind, exit_, -np.inf).max(axis=1, initial=-np.inf)
    start = np.where(np.isfinite(start), start, 0.0)[:, None]

    # compact the forward crossings to the left
    order = np.argsort(np.where(ahead, entry, np.inf), axis=1, kind="stable")
    n_ahead = int(ahead.sum(axis=1).max()) if ahead.size else 0
    order = order[:, :n_ahead]
    fe = np.take_along_axis(np.where(ahead, entry, np.inf), order, axis=1)
    fx = np.take_along_axis(np.where(ahead, exit_, np.inf), order, axis=1)
    valid = np.isfinite(fe)
    fe = np.where(valid, fe, 0.0)
    fx = np.where(valid, fx, 0.0)
    if swap_sw:
        k1, k2 = fe, fx
    elif kappa_rule == "user_gap":
        k2 = fe - start
        k1 = k2 - k2[:, :1]
    elif kappa_rule == "local_gap":
        prev_exit = np.concatenate([start, fx[:, :-1]], axis=1)
        k1 = prev_exit - start
        k2 = fe - start
    else:
        raise ValueError(f"unknown kappa rule {kappa_rule!r}")
    k1 = np.where(valid, k1, np.inf)
    k2 = np.where(valid, k2, np.inf)
    k1.setflags(write=False)
    k2.setflags(write=False)
    return k1, k2


def _s_max_bucket(gamma: float, tan_theta: float, pitch: float) -> float:
    need = _HEIGHT_CUTOFF_SIGMAS * gamma / tan_theta + 2 * pitch
    return pitch * 2.0 ** math.ceil(math.log2(max(need / pitch, 1.0)))


def region_plos(
    env: Environment,
    theta: float,
    phi: float,
    region: str,
    *,
    n_side: int = 16,
    normalization: str = "printed",
    kappa_rule: str = "user_gap",
    swap_sw: bool = False,
) -> float:
    """LoS probability for users in one street region at azimuth ``phi``."""
    w, s = derive_dimensions(env)
    t = math.tan(math.radians(theta))
    s_max = _s_max_bucket(env.gamma, t, w + s)
    k1, k2 = _region_kappas(
        w, s, float(phi), region, n_side, s_max, kappa_rule, bool(swap_sw)
    )
    finite = np.isfinite(k1)
    h_min = np.where(finite, k1 * t, 0.0)
    h_max = np.where(finite, k2 * t, 1.0)
    factors = single_building_plos(h_min, h_max, env.gamma, normalization=normalization)
    factors = np.where(finite, factors, 1.0)
    return float(np.mean(np.prod(factors, axis=1)))


def region_weights(env: Environment) -> Tuple[float, float, float]:
    """Area weights (SW/A, SW/A, S^2/A) of the three street regions."""
    w, s = derive_dimensions(env)
    area = (s + w) ** 2 - w**2
    weights = (s * w / area, s * w / area, s * s / area)
    assert abs(sum(weights) - 1.0) < 1e-12
    return weights


def _fold_phi(phi: float) -> float:
    return float(phi) % 90.0


def plos_region3d(
    env: Environment,
    theta: float,
    phi: float,
    *,
    n_side: int = 16,
    normalization: str = "printed",
    kappa_rule: str = "user_gap",
    swap_sw: bool = False,
    clamp=True,
) -> float:
    """Region-weighted LoS probability for elevation ``theta`` and azimuth ``phi``.

    The lattice is invariant under quarter turns, so ``phi`` is folded into
    [0, 90).
    """
    if not 0.0 < theta <= 90.0:
        raise ValueError("theta must lie in (0, 90]")
    if theta == 90.0:
        return 1.0
    phi = _fold_phi(phi)
    w1, w2, w3 = region_weights(env)
    kw = dict(n_side=n_side, normalization=normalization, kappa_rule=kappa_rule, swap_sw=swap_sw)
    value = (
        w1 * region_plos(env, theta, phi, "R1", **kw)
        + w2 * region_plos(env, theta, phi, "R2", **kw)
        + w3 * region_plos(env, theta, phi, "R3", **kw)
    )
    return _clamp(value, clamp)


def plos_region3d_avg(
    env: Environment,
    theta: float,
    *,
    n_phi: int = 32,
    n_side: int = 16,
    normalization: str = "printed",
    kappa_rule: str = "user_gap",
    swap_sw: bool = False,
    clamp=True,
) -> float:
    """Region model averaged over azimuth with ``n_phi``-point Gauss-Legendre on [0, 90)."""
    nodes, weights = np.polynomial.legendre.leggauss(n_phi)
    phis = 45.0 * (nodes + 1.0)
    vals = [
        plos_region3d(
            env, theta, phi, n_side=n_side, normalization=normalization,
            kappa_rule=kappa_rule, swap_sw=swap_sw, clamp=False,
        )
        for phi in phis
    ]
    return _clamp(0.5 * float(np.dot(weights, vals)), clamp)


# ---------------------------------------------------------------------------
# 3GPP aerial


GPP_SCENARIOS = ("RMa", "UMa", "UMi")


@lru_cache(maxsize=None)
def _gpp_table():
    table = {}
    for row in load_table("gpp_plos.csv"):
        table[(row["scenario"], row["param"])] = (
            float(row["slope"]),
            float(row["offset"]),
            opt_float(row["floor"]),
        )
    return table


def gpp_coefficients(scenario: str, param: str) -> Tuple[float, float, Optional[float]]:
    """Raw ``(slope, offset, floor)`` for ``param`` in ``{"p1", "d1"}``; floor may be None."""
    return _gpp_table()[(normalize_scenario(scenario), param)]


def normalize_scenario(scenario: str) -> str:
    for name in GPP_SCENARIOS:
        if scenario.strip().lower() == name.lower():
            return name
    raise ValueError(f"unknown 3GPP scenario {scenario!r}; expected RMa, UMa or UMi")


def gpp_parameters(scenario: str, h_tx: float) -> Tuple[float, float]:
    """(p1, d1) for the given scenario and UAV height."""
    scenario = normalize_scenario(scenario)
    if not 1.5 <= h_tx <= 300.0:
        raise ValueError(f"h_tx {h_tx} m outside the 1.5-300 m validity range")
    out = []
    for param in ("p1", "d1"):
        slope, offset, floor = _gpp_table()[(scenario, param)]
        value = slope * math.log10(h_tx) + offset
        out.append(value if floor is None else max(value, floor))
    p1, d1 = out
    if p1 <= 0:
        raise ValueError(f"h_tx {h_tx} m gives non-positive p1 for {scenario}")
    return p1, d1


def plos_3gpp(scenario: str, r: float, h_tx: float, *, clamp=True) -> float:
    if r < 0:
        raise ValueError("r must be non-negative")
    p1, d1 = gpp_parameters(scenario, h_tx)
    if r <= d1:
        return 1.0
    value = d1 / r + math.exp(-r / p1) * (1.0 - d1 / r)
    return _clamp(value, clamp)


# ---------------------------------------------------------------------------
# Stochastic-geometry cylinders


@dataclass(frozen=True)
class CylinderParams:
    """Cylindrical buildings with log-normal heights.

    Attributes:
        r_o: mean building radius (m).
        lambda_o: building density per square meter.
        mu_o, sigma_o: parameters of ln(height).
    """

    r_o: float
    lambda_o: float
    mu_o: float
    sigma_o: float

    def __post_init__(self):
        if self.r_o <= 0 or self.lambda_o < 0 or self.sigma_o <= 0:
            raise ValueError("r_o and sigma_o must be positive, lambda_o non-negative")


def lognormal_tail(h, mu: float, sigma: float):
    """P(height > h) for log-normal heights; 1 for h <= 0."""
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore"):
        z = (np.log(np.where(h > 0, h, 1.0)) - mu) / (math.sqrt(2.0) * sigma)
    value = np.where(h > 0, 0.5 - 0.5 * erf(z), 1.0)
    return value if value.ndim else float(value)


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-8, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth - 1
        )

    if b == a:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def plos_cylinder(params: CylinderParams, r: float, h1: float, h2: float, *, clamp=True) -> float:
    """LoS probability through a field of log-normal cylinders.

    The ray height at ``x`` is ``h1 + (x/r)(h2 - h1)``; the blocking integral
    runs over ``[0, r - (pi/2) r_o]``.
    """
    if h1 < 0 or h2 < 0:
        raise ValueError("heights must be non-negative")
    upper = r - 0.5 * math.pi * params.r_o
    if upper <= 0 or params.lambda_o == 0:
        return 1.0

    def tail(x):
        return lognormal_tail(x / r * (h2 - h1) + h1, params.mu_o, params.sigma_o)

    integral = adaptive_simpson(tail, 0.0, upper, tol=1e-8)
    return _clamp(math.exp(-2.0 * params.r_o * params.lambda_o * integral), clamp)


# ---------------------------------------------------------------------------
# Dispatch


@lru_cache(maxsize=None)
def fitted_sigmoid(env: Environment, h_tx: float, h_rx: float = 1.5) -> SigmoidFit:
    """Sigmoid fitted to the ITU curve on a 1-degree grid over [10, 85] degrees.

    Cached per (environment, heights); the cache is write-once per key.
    """
    theta = np.arange(10.0, 86.0, 1.0)
    ref = [plos_itu(env, (h_tx - h_rx) / math.tan(math.radians(t)), h_tx, h_rx) for t in theta]
    return fit_sigmoid(theta, ref)


def plos(
    model,
    env: Environment,
    link: LinkGeometry,
    *,
    wavelength: Optional[float] = None,
    scenario: Optional[str] = None,
    cylinder: Optional[CylinderParams] = None,
    sigmoid: Optional[Tuple[float, float]] = None,
    phi_average: bool = False,
) -> float:
    """Evaluate any model on a link geometry."""
    model = PlosModelId.parse(model) if isinstance(model, str) else PlosModelId(model)
    r, h_tx, h_rx, theta = link.r, link.h_tx, link.h_rx, link.theta
    if model is PlosModelId.ITU:
        return plos_itu(env, r, h_tx, h_rx)
    if model is PlosModelId.FRESNEL:
        if wavelength is None:
            raise ValueError("fresnel model needs a wavelength")
        return plos_fresnel(env, r, h_tx, h_rx, wavelength)
    if model is PlosModelId.SIGMOID:
        a, b = sigmoid if sigmoid is not None else _sigmoid_ab(env, h_tx, h_rx)
        return plos_sigmoid(a, b, theta)
    if model is PlosModelId.SCURVE3:
        env_id = env_id_of(env)
        if env_id is None:
            raise ValueError("S-curve coefficients exist only for the standard environments")
        return plos_scurve3(env_id, theta)
    if model is PlosModelId.FIRST_BUILDING:
        return plos_first_building(env, r, h_tx) if r > 0 else 1.0
    if model is PlosModelId.REGION3D:
        if phi_average:
            return plos_region3d_avg(env, theta)
        return plos_region3d(env, theta, link.phi)
    if model is PlosModelId.GPP3:
        if scenario is None:
            raise ValueError("3GPP model needs a scenario")
        return plos_3gpp(scenario, r, h_tx)
    if model is PlosModelId.CYLINDER:
        if cylinder is None:
            raise ValueError("cylinder model needs CylinderParams")
        return plos_cylinder(cylinder, r, h_tx, h_rx)
    raise AssertionError(model)


def _sigmoid_ab(env, h_tx, h_rx):
    fit = fitted_sigmoid(env, float(h_tx), float(h_rx))
    return fit.a, fit.b


def plos_theta_curve(
    model,
    env: Environment,
    theta_grid: Sequence[float],
    *,
    h_tx: float = 300.0,
    h_rx: float = 1.5,
    placement: str = "fixed_height",
    r_fixed: Optional[float] = None,
    wavelength: Optional[float] = None,
    scenario: Optional[str] = None,
    cylinder: Optional[CylinderParams] = None,
    sigmoid: Optional[Tuple[float, float]] = None,
) -> np.ndarray:
    """Evaluate a model along an elevation grid.

    ``fixed_height`` keeps the UAV at ``h_tx`` and sets ``r = (h_tx - h_rx)/tan(theta)``;
    ``fixed_range`` keeps ``r = r_fixed`` and sets ``h_tx = h_rx + r tan(theta)``.
    The azimuth-dependent region model is averaged over azimuth.
    """
    model = PlosModelId.parse(model) if isinstance(model, str) else PlosModelId(model)
    out = []
    for theta in theta_grid:
        link = placement_link(theta, h_tx=h_tx, h_rx=h_rx, placement=placement, r_fixed=r_fixed)
        if sigmoid is None and model is PlosModelId.SIGMOID:
            sigmoid = _sigmoid_ab(env, h_tx, h_rx)
        out.append(
            plos(
                model, env, link, wavelength=wavelength, scenario=scenario,
                cylinder=cylinder, sigmoid=sigmoid, phi_average=True,
            )
        )
    return np.asarray(out)


def placement_link(
    theta: float,
    *,
    h_tx: float,
    h_rx: float = 1.5,
    placement: str = "fixed_height",
    r_fixed: Optional[float] = None,
    rx_xy: Tuple[float, float] = (0.0, 0.0),
    phi: float = 0.0,
) -> LinkGeometry:
    """UAV position for an elevation under the chosen placement rule."""
    rx = (rx_xy[0], rx_xy[1], h_rx)
    if placement == "fixed_height":
        return LinkGeometry.from_angles(rx, h_tx, theta, phi)
    if placement == "fixed_range":
        if r_fixed is None or r_fixed <= 0:
            raise ValueError("fixed_range placement needs a positive r_fixed")
        if theta >= 90:
            raise ValueError("fixed_range placement cannot reach 90 degrees elevation")
        h = h_rx + r_fixed * math.tan(math.radians(theta))
        return LinkGeometry.from_angles(rx, h, theta, phi)
    raise ValueError(f"unknown placement rule {placement!r}")
