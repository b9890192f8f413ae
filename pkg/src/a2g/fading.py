"""Shadow fading with exponential spatial correlation, and Rician small-scale fading."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import lfilter

from .plos_models import normalize_scenario
from .tables import load_table, opt_float

# Decorrelation distance used when the source row reports none.
DEFAULT_DECORR_M = 5.0

DEFAULT_K_DB = {"los": 20.0, "nlos": 10.0}


@dataclass(frozen=True)
class ShadowRow:
    study: str
    environment: str
    freq_ghz_min: float
    freq_ghz_max: float
    condition: str
    kind: str
    coef: Optional[float]
    rate: Optional[float]
    floor: Optional[float]
    sigma_lo: Optional[float]
    sigma_hi: Optional[float]
    decorr_lo: Optional[float]
    decorr_hi: Optional[float]

    def sigma(self, h_tx: Optional[float] = None) -> float:
        """Std deviation in dB; ranges resolve to their midpoint."""
        if self.kind == "const":
            return self.coef
        if self.kind == "range":
            return 0.5 * (self.sigma_lo + self.sigma_hi)
        if h_tx is None:
            raise ValueError(f"{self.study} {self.environment} sigma depends on h_tx")
        value = self.coef * math.exp(-self.rate * h_tx)
        if self.kind == "max_exp":
            value = max(self.floor, value)
        return value

    @property
    def decorr(self) -> float:
        if self.decorr_lo is None:
            return DEFAULT_DECORR_M
        return 0.5 * (self.decorr_lo + self.decorr_hi)


@lru_cache(maxsize=None)
def _shadow_rows():
    rows = []
    for r in load_table("shadow_fading.csv"):
        rows.append(
            ShadowRow(
                r["study"], r["environment"], float(r["freq_ghz_min"]), float(r["freq_ghz_max"]),
                r["condition"], r["kind"],
                *(opt_float(r[k]) for k in (
                    "coef", "rate", "floor", "sigma_lo", "sigma_hi", "decorr_lo", "decorr_hi"
                )),
            )
        )
    return tuple(rows)


def shadow_table() -> List[ShadowRow]:
    return list(_shadow_rows())


def shadow_sigma(scenario: str, condition: str, h_tx: float) -> float:
    """3GPP aerial shadow-fading std (dB) for RMa/UMa/UMi."""
    scenario = normalize_scenario(scenario)
    if not 1.5 <= h_tx <= 300.0:
        raise ValueError(f"h_tx {h_tx} m outside the 1.5-300 m validity range")
    for row in _shadow_rows():
        if row.study == "[53]" and row.environment == scenario and (
            row.condition.lower() == condition.strip().lower()
        ):
            return row.sigma(h_tx)
    raise ValueError(f"unknown condition {condition!r}")


@dataclass(frozen=True)
class ShadowConfig:
    sigma_db: float
    d_decorr: float = DEFAULT_DECORR_M
    step: float = 1.0

    def __post_init__(self):
        if self.sigma_db < 0 or self.d_decorr <= 0 or self.step <= 0:
            raise ValueError("need sigma_db >= 0, d_decorr > 0, step > 0")

    @property
    def rho(self) -> float:
        """Lag-one correlation ``exp(-step / d_decorr)``."""
        return math.exp(-self.step / self.d_decorr)


def shadow_trace(cfg: ShadowConfig, n: int, seed) -> np.ndarray:
    """Zero-mean Gaussian shadowing samples spaced ``cfg.step`` meters apart.

    First-order Gauss-Markov recursion started from the stationary law, so
    the autocorrelation at lag ``k`` is ``exp(-k step / d_decorr)`` exactly.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n)
    if cfg.sigma_db == 0:
        return np.zeros(n)
    a = cfg.rho
    out = np.empty(n)
    out[0] = w[0]
    out[1:], _ = lfilter([math.sqrt(1.0 - a * a)], [1.0, -a], w[1:], zi=[a * w[0]])
    return cfg.sigma_db * out


def trace_to_csv(trace: np.ndarray, step: float) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "distance_m", "value"])
    for i, v in enumerate(trace):
        writer.writerow([i, repr(float(i * step)), repr(float(v))])
    return buf.getvalue()


@dataclass(frozen=True)
class RicianConfig:
    """Rician K-factor in dB; ``rayleigh=True`` means K = 0 (linear)."""

    k_db: float = DEFAULT_K_DB["los"]
    rayleigh: bool = False

    def __post_init__(self):
        if not self.rayleigh and math.isnan(self.k_db):
            raise ValueError("k_db must be a number")

    @property
    def k_linear(self) -> float:
        if self.rayleigh:
            return 0.0
        return 10 ** (self.k_db / 10)

    @classmethod
    def for_condition(cls, condition: str) -> "RicianConfig":
        return cls(DEFAULT_K_DB[condition.strip().lower()])


def small_scale_gain(cfg: RicianConfig, n: int, seed) -> np.ndarray:
    """Unit-mean power gains ``|h|^2`` of a Rician channel."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    k = cfg.k_linear
    if math.isinf(k):
        return np.ones(n)
    scatter = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    h = math.sqrt(k / (k + 1)) + math.sqrt(1 / (k + 1)) * scatter
    return np.abs(h) ** 2


def estimate_k_moments(gains: np.ndarray) -> float:
    """Moment estimate of the linear K-factor from power samples.

    With ``v = var(g)/mean(g)^2``, a Rician power satisfies
    ``v = (2K + 1)/(K + 1)^2``, whose non-negative root is
    ``K = (1 - v + sqrt(1 - v))/v``.
    """
    g = np.asarray(gains, dtype=float)
    v = g.var() / g.mean() ** 2
    if v >= 1.0:
        return 0.0
    return (1 - v + math.sqrt(1 - v)) / v


def empirical_acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    x = np.asarray(x, dtype=float) - np.mean(x)
    var = np.dot(x, x) / x.size
    return np.array([np.dot(x[: x.size - k], x[k:]) / x.size / var for k in range(max_lag + 1)])


def condition_params(scenario: str, condition: str, h_tx: float) -> Tuple[ShadowConfig, RicianConfig]:
    """Default shadowing and Rician settings for a 3GPP scenario and link state."""
    return (
        ShadowConfig(shadow_sigma(scenario, condition, h_tx)),
        RicianConfig.for_condition(condition),
    )
