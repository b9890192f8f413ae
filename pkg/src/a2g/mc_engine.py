"""Monte Carlo LoS campaigns over random Manhattan cities and model comparison.

Every trial draws from its own generator seeded by
``SeedSequence([master_seed, grid_index, trial_index])``, so results depend
neither on trial order nor on the number of worker processes.
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import binomtest

from . import env_grid
from .env_grid import Environment, LinkGeometry, generate_city, get_environment, los_blocked
from .fading import small_scale_gain
from .pathloss_models import AbParams, pl_3gpp, pl_ab
from .plos_models import (
    SPEED_OF_LIGHT,
    PlosModelId,
    n_obstructing,
    placement_link,
    plos,
    plos_theta_curve,
)

log = logging.getLogger(__name__)

MIN_TRIALS = 100
PLACEMENTS = ("fixed_height", "fixed_range")
WORLDS = ("manhattan", "itu_midpoint")
# Trials are grouped into fixed-size blocks; the block size never depends on
# the worker count.
_BLOCK = 250
# Models that need geometry a lattice campaign does not provide.
_UNSUPPORTED = {PlosModelId.CYLINDER}


class ConfigError(ValueError):
    """Invalid campaign configuration; ``line`` points into the source file when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


def parse_grid(text: str) -> Tuple[float, ...]:
    """Parse ``start:stop:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"grid {text!r} needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    values = tuple(float(p) for p in text.split(",") if p.strip())
    if not values:
        raise ValueError("empty grid")
    return values


@dataclass(frozen=True)
class CampaignConfig:
    """Settings of one empirical LoS campaign.

    Args:
        env: standard environment id or an :class:`Environment`.
        theta_grid: elevation angles in degrees, strictly ascending.
        trials_per_point: Monte Carlo trials per elevation, at least 100.
        h_tx: UAV height (m) for fixed-height placement.
        h_rx: ground-node height (m).
        placement: ``fixed_height`` or ``fixed_range``.
        r_fixed: horizontal distance (m) for fixed-range placement.
        master_seed: root of all per-trial seeds.
        models: analytical models compared against the empirical curve.
        world: ``manhattan`` samples random cities; ``itu_midpoint`` samples
            only the buildings the ITU product assumes, at their midpoints.
        reuse_city: draw one city for the whole campaign instead of one per trial.
        freq_ghz: carrier for the Fresnel-corrected model.
        scenario: 3GPP scenario for the ``gpp3`` model.
    """

    env: Union[str, Environment] = "urban"
    theta_grid: Tuple[float, ...] = tuple(float(t) for t in range(10, 90, 5))
    trials_per_point: int = 2000
    h_tx: float = 300.0
    h_rx: float = 0.0
    placement: str = "fixed_height"
    r_fixed: Optional[float] = None
    master_seed: int = 0
    models: Tuple[str, ...] = ("itu", "sigmoid", "scurve3", "region3d")
    world: str = "manhattan"
    reuse_city: bool = False
    freq_ghz: float = 2.0
    scenario: str = "UMa"

    def __post_init__(self):
        if isinstance(self.env, str):
            object.__setattr__(self, "env", get_environment(self.env))
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))
        object.__setattr__(self, "models", tuple(PlosModelId.parse(m).value for m in self.models))
        if self.trials_per_point < MIN_TRIALS:
            raise ValueError(f"trials_per_point must be >= {MIN_TRIALS}")
        grid = self.theta_grid
        if not grid:
            raise ValueError("theta_grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("theta_grid must be strictly ascending")
        if grid[0] <= 0 or grid[-1] > 90:
            raise ValueError("theta_grid values must lie in (0, 90]")
        if not self.h_tx > self.h_rx >= 0:
            raise ValueError("requires h_tx > h_rx >= 0")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"placement must be one of {PLACEMENTS}")
        if self.placement == "fixed_range" and not (self.r_fixed and self.r_fixed > 0):
            raise ValueError("fixed_range placement needs a positive r_fixed")
        if self.world not in WORLDS:
            raise ValueError(f"world must be one of {WORLDS}")
        for m in self.models:
            if PlosModelId(m) in _UNSUPPORTED:
                raise ValueError(f"model {m!r} cannot be evaluated on a lattice campaign")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    @property
    def env_id(self) -> str:
        return env_grid.env_id_of(self.env) or "custom"

    def to_dict(self) -> dict:
        return {
            "env": self.env_id if self.env_id != "custom" else self.env.to_dict(),
            "theta_grid": list(self.theta_grid),
            "trials_per_point": self.trials_per_point,
            "h_tx": self.h_tx,
            "h_rx": self.h_rx,
            "placement": self.placement,
            "r_fixed": self.r_fixed,
            "master_seed": self.master_seed,
            "models": list(self.models),
            "world": self.world,
            "reuse_city": self.reuse_city,
            "freq_ghz": self.freq_ghz,
            "scenario": self.scenario,
        }


# ---------------------------------------------------------------------------
# Trials


def trial_rng(master_seed: int, grid_index: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, grid_index, trial_index]))


def _city_extent(env: Environment, r: float) -> float:
    p = env.pitch
    return max(10.0 * p, 2.0 * (r + 3.0 * p))


@lru_cache(maxsize=4)
def _shared_city(cfg: CampaignConfig):
    if cfg.placement == "fixed_range":
        r_max = cfg.r_fixed
    else:
        r_max = (cfg.h_tx - cfg.h_rx) / math.tan(math.radians(cfg.theta_grid[0]))
    seed = int(np.random.SeedSequence([cfg.master_seed]).generate_state(1)[0])
    return generate_city(cfg.env, _city_extent(cfg.env, r_max), seed)


def _trial_los(cfg: CampaignConfig, theta: float, rng: np.random.Generator, city=None) -> bool:
    env = cfg.env
    if cfg.world == "itu_midpoint":
        link = placement_link(theta, h_tx=cfg.h_tx, h_rx=cfg.h_rx, placement=cfg.placement, r_fixed=cfg.r_fixed)
        m = n_obstructing(env, link.r) if link.r > 0 else -1
        if m < 0:
            return True
        dh = link.h_tx - link.h_rx
        h_ray = link.h_tx - (np.arange(m + 1) + 0.5) * dh / (m + 1)
        return bool(np.all(rng.rayleigh(env.gamma, m + 1) < h_ray))

    xy = env_grid.sample_street_position(env, rng)
    phi = rng.uniform(0.0, 360.0)
    link = placement_link(
        theta, h_tx=cfg.h_tx, h_rx=cfg.h_rx, placement=cfg.placement,
        r_fixed=cfg.r_fixed, rx_xy=xy, phi=phi,
    )
    if city is None:
        city = generate_city(env, _city_extent(env, link.r), int(rng.integers(2**63)))
    try:
        return not los_blocked(city, link)
    except ValueError:
        # UAV inside a building taller than its altitude: no line of sight.
        return False


def _run_block(args) -> Tuple[int, int, int]:
    cfg, grid_index, start, stop = args
    theta = cfg.theta_grid[grid_index]
    city = _shared_city(cfg) if cfg.reuse_city and cfg.world == "manhattan" else None
    n_los = 0
    for t in range(start, stop):
        n_los += _trial_los(cfg, theta, trial_rng(cfg.master_seed, grid_index, t), city)
    return grid_index, start, n_los


def _reachable(cfg: CampaignConfig, theta: float) -> bool:
    try:
        placement_link(theta, h_tx=cfg.h_tx, h_rx=cfg.h_rx, placement=cfg.placement, r_fixed=cfg.r_fixed)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# Curves


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    ci = binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class PlosCurve:
    """Empirical LoS probability per elevation; unreachable points hold NaN."""

    theta: np.ndarray
    value: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_los: np.ndarray
    n_trials: int

    @property
    def ci_half_width(self) -> np.ndarray:
        return 0.5 * (self.ci_hi - self.ci_lo)


def empirical_plos(cfg: CampaignConfig, workers: int = 1) -> PlosCurve:
    """Fraction of unblocked links per elevation, with 95% Wilson intervals."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n = cfg.trials_per_point
    tasks = []
    skipped = []
    for gi, theta in enumerate(cfg.theta_grid):
        if not _reachable(cfg, theta):
            log.warning("theta=%g deg is unreachable under %s placement; point rejected", theta, cfg.placement)
            skipped.append(gi)
            continue
        tasks.extend((cfg, gi, s, min(s + _BLOCK, n)) for s in range(0, n, _BLOCK))

    if workers == 1 or len(tasks) <= 1:
        results = [_run_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, tasks, chunksize=1))

    counts = np.zeros(len(cfg.theta_grid), dtype=np.int64)
    for gi, _start, k in sorted(results):
        counts[gi] += k

    m = len(cfg.theta_grid)
    value, lo, hi = np.full(m, np.nan), np.full(m, np.nan), np.full(m, np.nan)
    for gi in range(m):
        if gi in skipped:
            continue
        value[gi] = counts[gi] / n
        lo[gi], hi[gi] = wilson_interval(int(counts[gi]), n)
    return PlosCurve(np.asarray(cfg.theta_grid), value, lo, hi, counts, n)


def analytical_curve(cfg: CampaignConfig, model: str) -> np.ndarray:
    """Model values on the campaign grid; NaN where the geometry is unreachable."""
    wavelength = SPEED_OF_LIGHT / (cfg.freq_ghz * 1e9)
    out = []
    for theta in cfg.theta_grid:
        try:
            (v,) = plos_theta_curve(
                model, cfg.env, [theta], h_tx=cfg.h_tx, h_rx=cfg.h_rx,
                placement=cfg.placement, r_fixed=cfg.r_fixed,
                wavelength=wavelength, scenario=cfg.scenario,
            )
        except ValueError:
            v = math.nan
        out.append(float(v))
    return np.asarray(out)


def rmse(model_values, empirical_values) -> float:
    """Root-mean-square difference over points where both are finite."""
    a = np.asarray(model_values, dtype=float)
    b = np.asarray(empirical_values, dtype=float)
    ok = np.isfinite(a) & np.isfinite(b)
    if not ok.any():
        return math.nan
    return float(np.sqrt(np.mean((a[ok] - b[ok]) ** 2)))


@dataclass
class ComparisonReport:
    empirical: PlosCurve
    analytical: Dict[str, np.ndarray]
    rmse: Dict[str, float]
    ranking: List[str] = field(default_factory=list)

    def curves_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta_deg", "model", "value", "ci_lo", "ci_hi"])
        emp = self.empirical
        for i, theta in enumerate(emp.theta):
            if np.isfinite(emp.value[i]):
                w.writerow([_fmt(theta), "empirical", _fmt(emp.value[i]), _fmt(emp.ci_lo[i]), _fmt(emp.ci_hi[i])])
        for model, values in self.analytical.items():
            for theta, v in zip(emp.theta, values):
                if np.isfinite(v):
                    w.writerow([_fmt(theta), model, _fmt(v), "", ""])
        return buf.getvalue()

    def report_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "rmse", "rank"])
        for rank, model in enumerate(self.ranking, start=1):
            w.writerow([model, _fmt(self.rmse[model]), rank])
        return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def rank_models(scores: Mapping[str, float]) -> List[str]:
    """Ascending RMSE, NaN last, ties broken by model name."""
    return sorted(scores, key=lambda m: (math.isnan(scores[m]), scores[m], m))


def compare_models(
    cfg: CampaignConfig, workers: int = 1, curve: Optional[PlosCurve] = None
) -> ComparisonReport:
    """Empirical curve, each configured model on the same grid, RMSE and ranking."""
    if not cfg.models:
        raise ValueError("model set is empty")
    if curve is None:
        curve = empirical_plos(cfg, workers=workers)
    analytical = {m: analytical_curve(cfg, m) for m in cfg.models}
    scores = {m: rmse(v, curve.value) for m, v in analytical.items()}
    return ComparisonReport(curve, analytical, scores, rank_models(scores))


# ---------------------------------------------------------------------------
# End-to-end channel samples


@dataclass(frozen=True)
class GppPathLoss:
    scenario: str = "UMa"
    f_ghz: float = 2.0

    def loss(self, los: bool, link: LinkGeometry) -> float:
        return pl_3gpp(self.scenario, "LoS" if los else "NLoS", link.d3d, link.h_tx, self.f_ghz)


@dataclass(frozen=True)
class AbPathLoss:
    los: AbParams
    nlos: AbParams

    def loss(self, los: bool, link: LinkGeometry) -> float:
        return pl_ab(self.los if los else self.nlos, link.d3d)


@dataclass(frozen=True)
class ChannelSample:
    los: bool
    plos: float
    pathloss_db: float
    shadow_db: float
    gain: float  # small-scale power gain, unit mean

    @property
    def total_loss_db(self) -> float:
        """Path loss plus shadowing minus small-scale gain, in dB."""
        return self.pathloss_db + self.shadow_db - 10.0 * math.log10(self.gain)


def _per_condition(cfg, los: bool):
    if isinstance(cfg, Mapping):
        return cfg["los" if los else "nlos"]
    return cfg


def channel_samples(
    link: LinkGeometry,
    plos_model,
    pl_params,
    shadow_cfg,
    rician_cfg,
    seed,
    n: int,
    *,
    env: Optional[Environment] = None,
    **plos_kwargs,
) -> List[ChannelSample]:
    """Draw ``n`` independent channel realizations for one link.

    Args:
        plos_model: a probability in [0, 1] or a model id evaluated with ``env``.
        pl_params: object with ``loss(los, link)``, e.g. :class:`GppPathLoss`.
        shadow_cfg: :class:`ShadowConfig` or a mapping ``{"los": .., "nlos": ..}``.
        rician_cfg: :class:`RicianConfig` or such a mapping.
    """
    if isinstance(plos_model, (int, float)) and not isinstance(plos_model, bool):
        p = float(plos_model)
    else:
        if env is None:
            raise ValueError("a model id needs an environment")
        p = plos(plos_model, env, link, **plos_kwargs)
    if not 0.0 <= p <= 1.0:
        raise ValueError("LoS probability must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    states = rng.random(n) < p
    normals = rng.standard_normal(n)
    gains = np.empty(n)
    loss = {}
    sigma = {}
    for los in (True, False):
        mask = states == los
        sigma[los] = _per_condition(shadow_cfg, los).sigma_db
        if mask.any():
            loss[los] = float(pl_params.loss(los, link))
            gains[mask] = small_scale_gain(_per_condition(rician_cfg, los), int(mask.sum()), rng)
    return [
        ChannelSample(bool(los), p, loss[bool(los)], sigma[bool(los)] * float(z), float(g))
        for los, z, g in zip(states, normals, gains)
    ]


def channel_sample(link, plos_model, pl_params, shadow_cfg, rician_cfg, seed, **kwargs) -> ChannelSample:
    """One channel realization; identical seeds give identical samples."""
    return channel_samples(link, plos_model, pl_params, shadow_cfg, rician_cfg, seed, 1, **kwargs)[0]


# ---------------------------------------------------------------------------
# Config files

_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}
_SECTION = "campaign"
_KEYS = {
    "env", "theta_grid", "trials_per_point", "h_tx", "h_rx", "placement", "r_fixed",
    "master_seed", "models", "world", "reuse_city", "freq_ghz", "scenario",
}


def _key_lines(text: str) -> Dict[Tuple[str, str], int]:
    lines: Dict[Tuple[str, str], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None and not raw[:1].isspace():
            lines[(section, m.group(1).strip().lower())] = no
    return lines


def parse_campaign_config(text: str, source: str = "<config>", **overrides) -> CampaignConfig:
    """Parse an INI campaign file; errors name the offending line.

    ``overrides`` replace file values after parsing (e.g. ``master_seed``).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("missing [campaign] section header", exc.lineno, source) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", exc.lineno, source) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section {exc.section!r}", exc.lineno, source) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", lineno, source) from None

    where = _key_lines(text)
    if not parser.has_section(_SECTION):
        raise ConfigError("missing [campaign] section", None, source)
    for sec in parser.sections():
        if sec != _SECTION:
            raise ConfigError(f"unknown section [{sec}]", None, source)

    values = {}
    for key, raw in parser.items(_SECTION):
        line = where.get((_SECTION, key))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line, source)
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", line, source) from None

    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return CampaignConfig(**values)
    except (ValueError, KeyError) as exc:
        msg = str(exc).strip("'\"")
        key = next((k for k in sorted(values, key=lambda k: where.get((_SECTION, k), 0)) if k in msg), None)
        raise ConfigError(msg, where.get((_SECTION, key)) if key else None, source) from None


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key in ("trials_per_point", "master_seed"):
        return int(raw)
    if key in ("h_tx", "h_rx", "freq_ghz"):
        return float(raw)
    if key == "r_fixed":
        return float(raw) if raw else None
    if key == "theta_grid":
        return parse_grid(raw)
    if key == "models":
        return tuple(m.strip() for m in raw.split(",") if m.strip())
    if key == "reuse_city":
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ValueError(f"expected a boolean, got {raw!r}") from None
    return raw


def with_seed(cfg: CampaignConfig, seed: Optional[int]) -> CampaignConfig:
    return cfg if seed is None else replace(cfg, master_seed=int(seed))
