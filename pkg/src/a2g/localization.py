"""RSSI log-distance measurement model and grid-search maximum-likelihood localization.

The emitter is searched on a horizontal plane at a fixed height; UAV poses
are full 3D positions.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RssiModel:
    p_ref: float
    d_ref: float = 1.0
    n_p: float = 2.0

    def __post_init__(self):
        if self.d_ref <= 0:
            raise ValueError("d_ref must be positive")


@dataclass(frozen=True)
class RssiMeasurement:
    uav_position: Tuple[float, float, float]
    rho: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("measurement sigma must be positive")


def _as3(p: Sequence[float], z_default: float = 0.0) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] == 2:
        p = np.concatenate([p, np.full(p.shape[:-1] + (1,), z_default)], axis=-1)
    return p


def rssi_forward(model: RssiModel, emitter, uav_position, *, clamp_warn: bool = True):
    """Noiseless received power (dBm) at the UAV for an emitter position.

    Distances below ``d_ref`` are clamped to ``d_ref``.
    """
    d = np.linalg.norm(_as3(emitter) - _as3(uav_position), axis=-1)
    if np.any(d < model.d_ref):
        if clamp_warn:
            log.warning("distance below d_ref=%g m clamped", model.d_ref)
        d = np.maximum(d, model.d_ref)
    out = model.p_ref - 10.0 * model.n_p * np.log10(d / model.d_ref)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class SearchRegion:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z: float = 0.0

    def __post_init__(self):
        if not (self.x_max >= self.x_min and self.y_max >= self.y_min):
            raise ValueError("empty search region")

    def axes(self, resolution: float) -> Tuple[np.ndarray, np.ndarray]:
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        nx = int(math.floor((self.x_max - self.x_min) / resolution + 1e-9)) + 1
        ny = int(math.floor((self.y_max - self.y_min) / resolution + 1e-9)) + 1
        return self.x_min + resolution * np.arange(nx), self.y_min + resolution * np.arange(ny)


@dataclass
class LocalizationResult:
    position: Tuple[float, float, float]
    loglik: float
    xs: np.ndarray
    ys: np.ndarray
    likelihood_map: np.ndarray  # log-likelihood, shape (len(xs), len(ys))

    def map_to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "loglik"])
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(self.likelihood_map[i, j]))])
        return buf.getvalue()


def log_likelihood(model: RssiModel, measurements: Sequence[RssiMeasurement], points) -> np.ndarray:
    """Gaussian log-likelihood up to the constant normalisation term.

    ``points`` has shape ``(..., 3)``; the result has shape ``(...)``.
    """
    pts = np.asarray(points, dtype=float)
    total = np.zeros(pts.shape[:-1])
    for m in measurements:
        d = np.linalg.norm(pts - np.asarray(m.uav_position, dtype=float), axis=-1)
        d = np.maximum(d, model.d_ref)
        pred = model.p_ref - 10.0 * model.n_p * np.log10(d / model.d_ref)
        total -= (m.rho - pred) ** 2 / (2.0 * m.sigma**2)
    return total


def mle_localize(
    model: RssiModel,
    measurements: Sequence[RssiMeasurement],
    region: SearchRegion,
    resolution: float,
    *,
    chunk_rows: int = 256,
) -> LocalizationResult:
    """Grid-search maximum-likelihood emitter position.

    Rows of the grid are evaluated in independent chunks; the argmax takes
    the smallest flat grid index among ties, so the result does not depend on
    the chunking.
    """
    if not measurements:
        raise ValueError("at least one measurement is required")
    measurements = list(measurements)
    xs, ys = region.axes(resolution)
    if xs.size == 0 or ys.size == 0:
        raise ValueError("empty search region")
    loglik = np.empty((xs.size, ys.size))
    for start in range(0, xs.size, chunk_rows):
        gx, gy = np.meshgrid(xs[start : start + chunk_rows], ys, indexing="ij")
        pts = np.stack([gx, gy, np.full_like(gx, region.z)], axis=-1)
        loglik[start : start + chunk_rows] = log_likelihood(model, measurements, pts)
    flat = int(np.argmax(loglik))  # first occurrence = smallest index
    i, j = np.unravel_index(flat, loglik.shape)
    return LocalizationResult(
        position=(float(xs[i]), float(ys[j]), float(region.z)),
        loglik=float(loglik[i, j]),
        xs=xs,
        ys=ys,
        likelihood_map=loglik,
    )


def synthesize_measurements(
    model: RssiModel,
    emitter,
    poses: Iterable[Sequence[float]],
    sigma: float,
    rng: Optional[np.random.Generator] = None,
) -> List[RssiMeasurement]:
    """RSSI readings from the log-distance model plus Gaussian noise (dB)."""
    out = []
    for pose in poses:
        mean = rssi_forward(model, emitter, pose, clamp_warn=False)
        noise = rng.normal(0.0, sigma) if (rng is not None and sigma > 0) else 0.0
        out.append(RssiMeasurement(tuple(float(v) for v in pose), float(mean + noise), max(sigma, 1e-12)))
    return out


def survey_trajectory(
    n: int = 50,
    *,
    center: Tuple[float, float] = (0.0, 0.0),
    half_width: float = 60.0,
    altitude: float = 30.0,
    legs: int = 5,
) -> np.ndarray:
    """Lawn-mower survey pattern of ``n`` poses over a square, in meters."""
    if n < 1 or legs < 1:
        raise ValueError("need at least one pose and one leg")
    s = np.linspace(0.0, float(legs), n)
    leg = np.minimum(np.floor(s), legs - 1)
    frac = s - leg
    frac = np.where(leg % 2 == 0, frac, 1.0 - frac)
    x = center[0] - half_width + 2 * half_width * frac
    y = center[1] - half_width + 2 * half_width * (leg / max(legs - 1, 1))
    return np.column_stack([x, y, np.full(n, altitude)])


def read_measurements_csv(text: str) -> List[RssiMeasurement]:
    """Parse ``x,y,z,rssi_dbm,sigma_db`` rows (header required)."""
    reader = csv.DictReader(io.StringIO(text))
    need = {"x", "y", "z", "rssi_dbm", "sigma_db"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise ValueError(f"measurement CSV needs columns {sorted(need)}")
    out = []
    for line_no, row in enumerate(reader, start=2):
        try:
            out.append(
                RssiMeasurement(
                    (float(row["x"]), float(row["y"]), float(row["z"])),
                    float(row["rssi_dbm"]),
                    float(row["sigma_db"]),
                )
            )
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
    return out
