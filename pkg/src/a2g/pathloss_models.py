"""Deterministic path-loss models and the LoS/NLoS combiner.

Frequencies are in Hz except for the 3GPP formulas, which take GHz as the
standard writes them.  Shadowing is never added here; see :mod:`a2g.fading`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np

from .plos_models import SPEED_OF_LIGHT, normalize_scenario
from .tables import load_table, opt_float

# Returned by the two-ray model at an exact interference null.
TWO_RAY_NULL_DB = math.inf


def fspl(d, f_c):
    """Free-space path loss in dB for distance ``d`` (m) and carrier ``f_c`` (Hz)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0) or f_c <= 0:
        raise ValueError("distance and frequency must be positive")
    out = 20 * np.log10(d) + 20 * math.log10(f_c) + 20 * math.log10(4 * math.pi / SPEED_OF_LIGHT)
    return out if out.ndim else float(out)


def _check_3gpp(d3d, h_tx, f_ghz):
    if np.any(np.asarray(d3d) <= 0) or h_tx <= 0 or f_ghz <= 0:
        raise ValueError("d3d, h_tx and f_c must be positive")
    if not 1.5 <= h_tx <= 300.0:
        raise ValueError(f"h_tx {h_tx} m outside the 1.5-300 m validity range")


def pl_3gpp(scenario: str, condition: str, d3d, h_tx: float, f_ghz: float):
    """3GPP aerial-UE path loss (dB) for RMa, UMa and UMi.

    Args:
        scenario: ``RMa``, ``UMa`` or ``UMi``.
        condition: ``LoS`` or ``NLoS``.
        d3d: 3D distance in meters.
        h_tx: UAV height in meters.
        f_ghz: carrier frequency in GHz.
    """
    scenario = normalize_scenario(scenario)
    cond = condition.strip().lower()
    if cond not in ("los", "nlos"):
        raise ValueError(f"unknown condition {condition!r}")
    _check_3gpp(d3d, h_tx, f_ghz)
    d3d = np.asarray(d3d, dtype=float)
    log_d = np.log10(d3d)
    log_h = math.log10(h_tx)
    carrier = 20 * math.log10(40 * math.pi * f_ghz / 3)

    if scenario == "RMa":
        los = max(23.9 - 1.8 * log_h, 20.0) * log_d + carrier
        if cond == "los":
            out = los
        else:
            out = np.maximum(los, -12.0 + (35.0 - 5.3 * log_h) * log_d + carrier)
    elif scenario == "UMa":
        if cond == "los":
            out = 28.0 + 22.0 * log_d + 20 * math.log10(f_ghz)
        else:
            out = -17.5 + (46.0 - 7.0 * log_h) * log_d + carrier
    else:
        los = np.maximum(
            fspl(d3d, f_ghz * 1e9),
            30.9 + (22.25 - 0.5 * log_h) * log_d + 20 * math.log10(f_ghz),
        )
        if cond == "los":
            out = los
        else:
            out = np.maximum(los, 32.4 + (43.2 - 7.6 * log_h) * log_d + 20 * math.log10(f_ghz))
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LogDistanceParams:
    n: float
    d0: float
    f_c: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.n <= 0 or self.d0 <= 0 or self.f_c <= 0:
            raise ValueError("n, d0 and f_c must be positive")


def pl_log_distance(params: LogDistanceParams, d):
    """Free-space anchor at ``d0`` plus ``10 n log10(d/d0)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < params.d0):
        raise ValueError("log-distance model is defined for d >= d0")
    out = fspl(params.d0, params.f_c) + 10 * params.n * np.log10(d / params.d0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AbParams:
    A: float
    B: float
    condition: str
    frequency: float
    environment: str
    study: str = ""
    variant: str = ""
    source: str = "table"

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("slope B must be positive")


def pl_ab(params: AbParams, d):
    """AB (intercept/slope) path loss ``A + 10 B log10(d)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = params.A + 10 * params.B * np.log10(d)
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def _ab_rows():
    return tuple(
        AbParams(
            A=float(r["A"]),
            B=float(r["B"]),
            condition=r["condition"],
            frequency=float(r["freq_ghz"]),
            environment=r["environment"],
            study=r["study"],
            variant=r["variant"],
            source=r["source"],
        )
        for r in load_table("ab_pathloss.csv")
    )


def ab_table() -> List[AbParams]:
    return list(_ab_rows())


def ab_lookup(
    study: str,
    environment: str,
    freq_ghz: float,
    condition: str,
    variant: str = "",
    source: str = "table",
) -> AbParams:
    """Find one AB parameter row; environment matching is a case-insensitive substring test."""
    hits = [
        p
        for p in _ab_rows()
        if p.study == study
        and environment.lower() in p.environment.lower()
        and p.frequency == freq_ghz
        and p.condition.lower() == condition.lower()
        and p.variant == variant
        and p.source == source
    ]
    if len(hits) != 1:
        raise KeyError(
            f"{len(hits)} AB rows match {study} {environment} {freq_ghz} GHz {condition}"
        )
    return hits[0]


@dataclass(frozen=True)
class LogDistanceStudy:
    study: str
    environment: str
    freq_ghz_min: float
    freq_ghz_max: float
    pl_d0_db: Optional[float]
    n_min: float
    n_max: float
    condition: str
    link: str


def log_distance_table() -> List[LogDistanceStudy]:
    return [
        LogDistanceStudy(
            r["study"], r["environment"], float(r["freq_ghz_min"]), float(r["freq_ghz_max"]),
            opt_float(r["pl_d0_db"]), float(r["n_min"]), float(r["n_max"]), r["condition"],
            r["link"],
        )
        for r in load_table("log_distance.csv")
    ]


def pl_two_ray(d, h_tx: float, h_rx: float, f_c: float):
    """Two-ray ground-reflection path loss in dB.

    The horizontal distance ``d`` plays the role of the path length.  At an
    exact null (``sin`` of the phase term equal to zero) the loss is
    :data:`TWO_RAY_NULL_DB`.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0) or h_tx <= 0 or h_rx <= 0 or f_c <= 0:
        raise ValueError("all arguments must be positive")
    lam = SPEED_OF_LIGHT / f_c
    phase = np.mod(2 * math.pi * h_rx * h_tx / (lam * d), 2 * math.pi)
    s = np.sin(phase)
    with np.errstate(divide="ignore"):
        gain = (lam / (4 * math.pi * d)) ** 2 * (2 * s) ** 2
        out = np.where(gain > 0, -10 * np.log10(gain), TWO_RAY_NULL_DB)
    return out if out.ndim else float(out)


def pl_combined(plos, pl_los, pl_nlos):
    """Expected path loss with the LoS/NLoS mixture taken in dB."""
    plos = np.asarray(plos, dtype=float)
    if np.any((plos < 0) | (plos > 1)):
        raise ValueError("plos must lie in [0, 1]")
    out = plos * np.asarray(pl_los) + (1 - plos) * np.asarray(pl_nlos)
    return out if np.ndim(out) else float(out)


def pl_combined_linear(plos, pl_los, pl_nlos):
    """Mixture of the linear path gains, returned in dB.

    Not the dB-domain average; exposed for comparison only.
    """
    plos = np.asarray(plos, dtype=float)
    if np.any((plos < 0) | (plos > 1)):
        raise ValueError("plos must lie in [0, 1]")
    gain = plos * 10 ** (-np.asarray(pl_los) / 10) + (1 - plos) * 10 ** (-np.asarray(pl_nlos) / 10)
    out = -10 * np.log10(gain)
    return out if np.ndim(out) else float(out)
