"""ITU Manhattan-grid city generation and exact geometric LoS testing.

A city is a square lattice of identical square buildings of side ``W``
separated by streets of width ``S``; building ``(i, j)`` covers
``[i*p, i*p + W] x [j*p, j*p + W]`` with pitch ``p = W + S``.  Heights are
i.i.d. Rayleigh draws with scale ``gamma``.  The geometric queries here are
the ground truth that the analytical LoS-probability models are checked
against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .tables import load_table

# Rays whose horizontal direction component is below this are treated as
# exactly parallel to the lattice axis.
_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class Environment:
    """ITU built-up parameters.

    Attributes:
        alpha: ratio of built-up area to total land area, in (0, 1).
        beta: buildings per square kilometre.
        gamma: Rayleigh scale of the building heights in meters.
        name: label used in reports.
    """

    alpha: float
    beta: float
    gamma: float
    name: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def width(self) -> float:
        return derive_dimensions(self)[0]

    @property
    def street(self) -> float:
        return derive_dimensions(self)[1]

    @property
    def pitch(self) -> float:
        return 1000.0 / math.sqrt(self.beta)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "name": self.name}


def _standard_environments() -> dict:
    envs = {}
    for row in load_table("environments.csv"):
        envs[row["env_id"]] = Environment(
            alpha=float(row["alpha"]),
            beta=float(row["beta_per_km2"]),
            gamma=float(row["gamma_m"]),
            name=row["name"],
        )
    return envs


STANDARD_ENVIRONMENTS = _standard_environments()
ENV_IDS = tuple(STANDARD_ENVIRONMENTS)


def get_environment(env_id: str) -> Environment:
    """Look up one of the four standard environments by id."""
    key = env_id.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
    aliases = {"denseurban": "dense", "urbanhighrise": "highrise", "highriseurban": "highrise"}
    key = aliases.get(key, key)
    try:
        return STANDARD_ENVIRONMENTS[key]
    except KeyError:
        raise KeyError(
            f"unknown environment {env_id!r}; expected one of {', '.join(ENV_IDS)}"
        ) from None


def env_id_of(env: Environment) -> Optional[str]:
    for key, value in STANDARD_ENVIRONMENTS.items():
        if value == env:
            return key
    return None


def derive_dimensions(env: Environment) -> Tuple[float, float]:
    """Building width and street width of the lattice, in meters.

    Uses ``W = 1000*sqrt(alpha/beta)`` and ``W + S = 1000/sqrt(beta)`` so that
    the built-up ratio is ``W**2/(W+S)**2`` and the density is one building
    per ``(W+S)**2``.
    """
    pitch = 1000.0 / math.sqrt(env.beta)
    width = 1000.0 * math.sqrt(env.alpha / env.beta)
    street = pitch - width
    if not street > 0.0:
        raise ValueError(f"degenerate environment {env.name!r}: street width {street} <= 0")
    return width, street


@dataclass(frozen=True)
class LinkGeometry:
    """Transmitter (UAV) and receiver (ground node) positions in meters.

    ``theta`` is the elevation of the TX seen from the RX and ``phi`` the
    horizontal bearing from RX to TX, both in degrees.
    """

    tx: Tuple[float, float, float]
    rx: Tuple[float, float, float]

    @classmethod
    def from_points(cls, tx: Sequence[float], rx: Sequence[float]) -> "LinkGeometry":
        return cls(tuple(float(v) for v in tx), tuple(float(v) for v in rx))

    @classmethod
    def from_angles(
        cls,
        rx: Sequence[float],
        h_tx: float,
        theta_deg: float,
        phi_deg: float = 0.0,
    ) -> "LinkGeometry":
        """Place the TX at height ``h_tx`` on the ray leaving ``rx`` at the given angles."""
        x, y, z = (float(v) for v in rx)
        if h_tx < z:
            raise ValueError("h_tx must not be below the receiver")
        if theta_deg >= 90.0:
            r = 0.0
        else:
            if theta_deg <= 0.0:
                raise ValueError("elevation must be positive")
            r = (h_tx - z) / math.tan(math.radians(theta_deg))
        ph = math.radians(phi_deg)
        return cls((x + r * math.cos(ph), y + r * math.sin(ph), float(h_tx)), (x, y, z))

    @property
    def h_tx(self) -> float:
        return self.tx[2]

    @property
    def h_rx(self) -> float:
        return self.rx[2]

    @property
    def r(self) -> float:
        return math.hypot(self.tx[0] - self.rx[0], self.tx[1] - self.rx[1])

    @property
    def d3d(self) -> float:
        return math.hypot(self.r, self.tx[2] - self.rx[2])

    @property
    def theta(self) -> float:
        return math.degrees(math.atan2(self.tx[2] - self.rx[2], self.r))

    @property
    def phi(self) -> float:
        return math.degrees(math.atan2(self.tx[1] - self.rx[1], self.tx[0] - self.rx[0])) % 360.0


class Crossing(NamedTuple):
    entry: float
    exit: float
    building: int


def _axis_intervals(a0, da, pitch, width, s_lo, s_hi):
    """Distance intervals during which ``a0 + s*da`` lies strictly inside a building band.

    Vectorised over origins ``a0`` (shape ``(N,)``).  Returns band indices and
    interval bounds of shape ``(N, K)``; unused slots have ``lo = +inf``.
    """
    a0 = np.asarray(a0, dtype=float)
    n = a0.shape[0]
    if abs(da) < _PARALLEL_EPS:
        k = np.floor(a0 / pitch)
        inside = (a0 > k * pitch) & (a0 < k * pitch + width)
        lo = np.where(inside, s_lo, np.inf)[:, None]
        hi = np.where(inside, s_hi, -np.inf)[:, None]
        return k[:, None], lo, hi
    a_start = a0 + s_lo * da
    a_end = a0 + s_hi * da
    k_min = np.floor(np.minimum(a_start, a_end) / pitch)
    k_max = np.floor(np.maximum(a_start, a_end) / pitch)
    count = int(np.max(k_max - k_min)) + 1 if n else 0
    k = k_min[:, None] + np.arange(count)[None, :]
    t1 = (k * pitch - a0[:, None]) / da
    t2 = (k * pitch + width - a0[:, None]) / da
    lo = np.maximum(np.minimum(t1, t2), s_lo)
    hi = np.minimum(np.maximum(t1, t2), s_hi)
    valid = (k <= k_max[:, None]) & (hi > lo)
    return k, np.where(valid, lo, np.inf), np.where(valid, hi, -np.inf)


def lattice_crossings(width, pitch, origins, direction, s_lo, s_hi):
    """Building crossings of many parallel horizontal rays on an infinite lattice.

    Args:
        width: building side W.
        pitch: lattice pitch W + S.
        origins: ``(N, 2)`` ray origins.
        direction: unit horizontal direction ``(ux, uy)``.
        s_lo, s_hi: distance window along the ray (``s_lo`` may be negative).

    Returns:
        ``(entry, exit, col, row)`` arrays of shape ``(N, K)`` sorted by entry
        distance; padding slots carry ``entry = +inf``.  Grazing contacts
        (zero-length overlap) are not crossings.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    ux, uy = float(direction[0]), float(direction[1])
    kx, xlo, xhi = _axis_intervals(origins[:, 0], ux, pitch, width, s_lo, s_hi)
    ky, ylo, yhi = _axis_intervals(origins[:, 1], uy, pitch, width, s_lo, s_hi)
    lo = np.maximum(xlo[:, :, None], ylo[:, None, :])
    hi = np.minimum(xhi[:, :, None], yhi[:, None, :])
    valid = hi > lo
    n = origins.shape[0]
    lo = np.where(valid, lo, np.inf).reshape(n, -1)
    hi = np.where(valid, hi, np.inf).reshape(n, -1)
    col = np.broadcast_to(kx[:, :, None], valid.shape).reshape(n, -1)
    row = np.broadcast_to(ky[:, None, :], valid.shape).reshape(n, -1)
    order = np.argsort(lo, axis=1, kind="stable")
    keep = int(valid.reshape(n, -1).sum(axis=1).max()) if n else 0
    order = order[:, :keep]
    take = lambda a: np.take_along_axis(a, order, axis=1)  # noqa: E731
    return take(lo), take(hi), take(col), take(row)


@dataclass(frozen=True, eq=False)
class CityRealization:
    """One sampled Manhattan city centred on the origin.

    Buildings ``(i, j)`` with ``-half <= i, j < half`` are stored; ``heights``
    is indexed ``[i + half, j + half]`` and the flat building index is
    ``(i + half) * 2*half + (j + half)``.
    """

    env: Environment
    extent: float
    seed: Optional[int]
    heights: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] % 2:
            raise ValueError("heights must be a square array with an even side")
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise ValueError("building heights must be finite and non-negative")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)

    @property
    def width(self) -> float:
        return derive_dimensions(self.env)[0]

    @property
    def pitch(self) -> float:
        return self.env.pitch

    @property
    def half(self) -> int:
        return self.heights.shape[0] // 2

    @property
    def bounds(self) -> Tuple[float, float]:
        return -self.half * self.pitch, self.half * self.pitch

    @property
    def n_buildings(self) -> int:
        return self.heights.size

    def footprints(self) -> np.ndarray:
        """``(n_buildings, 4)`` array of ``(x0, y0, x1, y1)`` in flat-index order."""
        idx = np.arange(-self.half, self.half) * self.pitch
        x0, y0 = np.meshgrid(idx, idx, indexing="ij")
        x0, y0 = x0.ravel(), y0.ravel()
        return np.column_stack([x0, y0, x0 + self.width, y0 + self.width])

    def building_index(self, col: int, row: int) -> int:
        return (col + self.half) * 2 * self.half + (row + self.half)

    def height_of(self, col: int, row: int) -> float:
        return float(self.heights[col + self.half, row + self.half])

    def footprint_at(self, x: float, y: float) -> Optional[Tuple[int, int]]:
        """Lattice index of the footprint whose open interior contains (x, y)."""
        p, w = self.pitch, self.width
        i, j = math.floor(x / p), math.floor(y / p)
        if i * p < x < i * p + w and j * p < y < j * p + w:
            return i, j
        return None

    def __eq__(self, other):
        if not isinstance(other, CityRealization):
            return NotImplemented
        return (
            self.env == other.env
            and self.extent == other.extent
            and self.seed == other.seed
            and np.array_equal(self.heights, other.heights)
        )

    def to_json(self, include_heights: bool = True) -> str:
        doc = {"env": self.env.to_dict(), "extent": self.extent, "seed": self.seed}
        if include_heights or self.seed is None:
            doc["half"] = self.half
            doc["heights"] = self.heights.ravel().tolist()
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "CityRealization":
        doc = json.loads(text)
        env = Environment(**doc["env"])
        if "heights" in doc:
            side = 2 * int(doc["half"])
            heights = np.asarray(doc["heights"], dtype=float).reshape(side, side)
            return cls(env, float(doc["extent"]), doc.get("seed"), heights)
        if doc.get("seed") is None:
            raise ValueError("city document needs either a seed or explicit heights")
        return generate_city(env, float(doc["extent"]), int(doc["seed"]))


def generate_city(env: Environment, extent: float, seed: int) -> CityRealization:
    """Sample a city of at least ``extent`` x ``extent`` meters centred on the origin."""
    pitch = env.pitch
    if extent < 10.0 * pitch:
        raise ValueError(f"extent {extent} m is below 10 lattice pitches ({10 * pitch:.3f} m)")
    half = math.ceil(extent / (2.0 * pitch))
    rng = np.random.default_rng(seed)
    heights = rng.rayleigh(env.gamma, size=(2 * half, 2 * half))
    return CityRealization(env, float(extent), seed, heights)


def _check_link(city: CityRealization, link: LinkGeometry) -> None:
    lo, hi = city.bounds
    for name, pt in (("rx", link.rx), ("tx", link.tx)):
        if not (lo <= pt[0] <= hi and lo <= pt[1] <= hi):
            raise ValueError(f"{name} {pt[:2]} lies outside the city extent")
    if city.footprint_at(link.rx[0], link.rx[1]) is not None:
        raise ValueError("rx lies inside a building footprint")
    hit = city.footprint_at(link.tx[0], link.tx[1])
    if hit is not None and link.tx[2] <= city.height_of(*hit):
        raise ValueError("tx lies inside a building")


def _crossing_arrays(city: CityRealization, link: LinkGeometry):
    r = link.r
    if r == 0.0:
        empty = np.empty(0)
        return empty, empty, empty.astype(int), empty.astype(int)
    ux = (link.tx[0] - link.rx[0]) / r
    uy = (link.tx[1] - link.rx[1]) / r
    entry, exit_, col, row = lattice_crossings(
        city.width, city.pitch, [link.rx[:2]], (ux, uy), 0.0, r
    )
    n = int(np.isfinite(entry[0]).sum())
    return entry[0, :n], exit_[0, :n], col[0, :n].astype(int), row[0, :n].astype(int)


def crossed_buildings(city: CityRealization, link: LinkGeometry) -> List[Crossing]:
    """Buildings whose footprint the horizontal projection of the link passes over.

    Distances are horizontal, measured from the RX, ordered by entry.
    """
    _check_link(city, link)
    entry, exit_, col, row = _crossing_arrays(city, link)
    return [
        Crossing(float(a), float(b), city.building_index(int(i), int(j)))
        for a, b, i, j in zip(entry, exit_, col, row)
    ]


def los_blocked(city: CityRealization, link: LinkGeometry) -> bool:
    """True when some crossed building reaches the ray anywhere over its footprint."""
    _check_link(city, link)
    entry, exit_, col, row = _crossing_arrays(city, link)
    if entry.size == 0:
        return False
    h = city.heights[col + city.half, row + city.half]
    z0, dz = link.rx[2], link.tx[2] - link.rx[2]
    r = link.r
    ray_min = np.minimum(z0 + dz * entry / r, z0 + dz * exit_ / r)
    return bool(np.any(h >= ray_min))


def _inside_footprint(city: CityRealization, xy: np.ndarray):
    p, w = city.pitch, city.width
    i, j = np.floor(xy[:, 0] / p), np.floor(xy[:, 1] / p)
    ox, oy = xy[:, 0] - i * p, xy[:, 1] - j * p
    inside = (ox > 0) & (ox < w) & (oy > 0) & (oy < w)
    return inside, i.astype(int), j.astype(int)


def los_blocked_many(city: CityRealization, rx, tx) -> np.ndarray:
    """Vectorized :func:`los_blocked` for links sharing one horizontal direction.

    Args:
        city: realization to test against.
        rx, tx: ``(N, 3)`` endpoint arrays. All links must have a positive
            horizontal range and the same azimuth.

    Returns:
        Boolean array of shape ``(N,)``.
    """
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    tx = np.atleast_2d(np.asarray(tx, dtype=float))
    if rx.shape != tx.shape or rx.shape[1] != 3:
        raise ValueError("rx and tx must both have shape (N, 3)")
    if rx.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    lo, hi = city.bounds
    for name, pts in (("rx", rx), ("tx", tx)):
        if np.any((pts[:, :2] < lo) | (pts[:, :2] > hi)):
            raise ValueError(f"some {name} points lie outside the city extent")
    if np.any(_inside_footprint(city, rx[:, :2])[0]):
        raise ValueError("some rx points lie inside a building footprint")
    inside, ti, tj = _inside_footprint(city, tx[:, :2])
    if np.any(inside):
        h_tx = city.heights[ti[inside] + city.half, tj[inside] + city.half]
        if np.any(tx[inside, 2] <= h_tx):
            raise ValueError("some tx points lie inside a building")

    delta = tx[:, :2] - rx[:, :2]
    r = np.hypot(delta[:, 0], delta[:, 1])
    if np.any(r == 0.0):
        raise ValueError("links need a positive horizontal range")
    u = delta / r[:, None]
    if not np.allclose(u, u[0], rtol=0.0, atol=1e-12):
        raise ValueError("all links must share one azimuth")

    entry, exit_, col, row = lattice_crossings(city.width, city.pitch, rx[:, :2], u[0], 0.0, r.max())
    exit_ = np.minimum(exit_, r[:, None])
    valid = entry < exit_
    col = np.where(valid, col, -city.half).astype(int)
    row = np.where(valid, row, -city.half).astype(int)
    h = city.heights[col + city.half, row + city.half]
    z0, dz = rx[:, 2:3], tx[:, 2:3] - rx[:, 2:3]
    entry = np.where(valid, entry, 0.0)
    ray_min = np.minimum(z0 + dz * entry / r[:, None], z0 + dz * exit_ / r[:, None])
    return np.any(valid & (h >= ray_min), axis=1)


def sample_street_position(
    env: Environment, rng: np.random.Generator, region: Optional[str] = None
) -> Tuple[float, float]:
    """Uniform point on the street area of the lattice cell at the origin.

    Regions follow the cell decomposition: ``R1`` is the street segment
    ``x in [0, W], y in (W, W+S)``, ``R2`` its mirror image and ``R3`` the
    intersection.  With ``region=None`` the whole street area is used, so the
    regions appear in proportion ``SW : SW : S**2``.
    """
    w, s = derive_dimensions(env)
    p = w + s
    if region is None:
        while True:
            x, y = rng.uniform(0.0, p, size=2)
            if x > w or y > w:
                return float(x), float(y)
    a, b = rng.uniform(0.0, 1.0, size=2)
    if region == "R1":
        return float(a * w), float(w + b * s)
    if region == "R2":
        return float(w + a * s), float(b * w)
    if region == "R3":
        return float(w + a * s), float(w + b * s)
    raise ValueError(f"unknown region {region!r}")
