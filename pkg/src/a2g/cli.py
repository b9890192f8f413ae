"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 I/O error.  Every file written is accompanied by a JSON run manifest.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from . import fading, localization, mc_engine, pathloss_models
from .env_grid import LinkGeometry, get_environment
from .plos_models import SPEED_OF_LIGHT, PlosModelId, SigmoidFitError, plos, plos_theta_curve

log = logging.getLogger("a2g")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
SEED_ENV = "A2G_SEED"


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def resolve_seed(cli_seed: Optional[int]) -> Optional[int]:
    """``A2G_SEED`` wins over ``--seed``."""
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return cli_seed


# ---------------------------------------------------------------------------
# Manifests


class RunContext:
    """Collects what a manifest needs while a command runs."""

    def __init__(self, command: str, argv: Sequence[str]):
        self.command = command
        self.argv = list(argv)
        self.config: dict = {}
        self.seeds: dict = {}
        self.outputs: List[Path] = []
        self.manifest_path: Optional[Path] = None
        self.started = time.monotonic()
        self.started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def write(self, path: Optional[str], text: str) -> None:
        if path is None or path == "-":
            sys.stdout.write(text)
            return
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.outputs.append(p)

    def manifest(self) -> dict:
        return {
            "command": self.command,
            "argv": self.argv,
            "replay_argv": self.replay_argv(),
            "config": self.config,
            "seeds": self.seeds,
            "versions": {
                "a2g": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "outputs": [
                {"path": str(p), "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
                for p in self.outputs
            ],
            "started_at": self.started_at,
            "wall_clock_s": round(time.monotonic() - self.started, 3),
        }

    def replay_argv(self) -> List[str]:
        """Arguments that rerun the command with every seed pinned."""
        if "seed" not in self.seeds and "master_seed" not in self.seeds:
            return list(self.argv)
        seed = self.seeds.get("seed", self.seeds.get("master_seed"))
        out, skip = [], False
        for a in self.argv:
            if skip:
                skip = False
                continue
            if a == "--seed":
                skip = True
                continue
            if a.startswith("--seed="):
                continue
            out.append(a)
        return out + ["--seed", str(seed)]

    def finish(self) -> None:
        if not self.outputs:
            return
        manifest_path = self.manifest_path
        if manifest_path is None:
            first = self.outputs[0]
            manifest_path = first.with_name(first.name + ".manifest.json")
        manifest_path.write_text(json.dumps(self.manifest(), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_plos(args, ctx: RunContext) -> None:
    env = get_environment(args.env)
    models = [PlosModelId.parse(m) for m in args.models.split(",") if m.strip()]
    if not models:
        raise UsageError("--models is empty")
    wavelength = SPEED_OF_LIGHT / (args.freq * 1e9)
    extra = dict(wavelength=wavelength, scenario=args.scenario)
    rows = []
    if args.r_grid:
        grid = mc_engine.parse_grid(args.r_grid)
        header = ["r_m", "model", "value"]
        for model in models:
            for r in grid:
                link = LinkGeometry.from_points((r, 0.0, args.h_tx), (0.0, 0.0, args.h_rx))
                rows.append([_fmt(r), model.value, _fmt(plos(model, env, link, phi_average=True, **extra))])
    else:
        grid = mc_engine.parse_grid(args.theta_grid)
        header = ["theta_deg", "model", "value"]
        for model in models:
            values = plos_theta_curve(
                model, env, grid, h_tx=args.h_tx, h_rx=args.h_rx,
                placement=args.placement, r_fixed=args.r_fixed, **extra,
            )
            rows.extend([_fmt(t), model.value, _fmt(v)] for t, v in zip(grid, values))
    ctx.config = {k: v for k, v in vars(args).items() if k != "func"}
    ctx.write(args.out, _csv_text(header, rows))


def cmd_sim(args, ctx: RunContext) -> None:
    path = Path(args.config)
    text = path.read_text(encoding="utf-8")
    seed = resolve_seed(args.seed)
    cfg = mc_engine.parse_campaign_config(text, source=str(path), master_seed=seed)
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    report = mc_engine.compare_models(cfg, workers=args.workers)
    ctx.config = cfg.to_dict()
    ctx.seeds = {"master_seed": cfg.master_seed}
    out = Path(args.out_dir)
    ctx.write(str(out / "curves.csv"), report.curves_csv())
    ctx.write(str(out / "report.csv"), report.report_csv())
    ctx.manifest_path = out / "manifest.json"


def cmd_pathloss(args, ctx: RunContext) -> None:
    d = np.asarray(mc_engine.parse_grid(args.d_grid))
    f_hz = args.freq * 1e9
    model = args.model
    if model == "fspl":
        values = pathloss_models.fspl(d, f_hz)
    elif model == "3gpp":
        values = pathloss_models.pl_3gpp(args.scenario, args.condition, d, args.h_tx, args.freq)
    elif model == "ab":
        if not args.study:
            raise UsageError("--study is required for the ab model")
        params = pathloss_models.ab_lookup(
            args.study, args.environment, args.freq, args.condition, variant=args.variant
        )
        values = pathloss_models.pl_ab(params, d)
    elif model == "log-distance":
        params = pathloss_models.LogDistanceParams(args.n, args.d0, f_hz)
        values = pathloss_models.pl_log_distance(params, d)
    elif model == "two-ray":
        values = pathloss_models.pl_two_ray(d, args.h_tx, args.h_rx, f_hz)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown model {model!r}")
    values = np.atleast_1d(values)
    ctx.config = {k: v for k, v in vars(args).items() if k != "func"}
    ctx.write(args.out, _csv_text(["d_m", "pathloss_db"], ([_fmt(a), _fmt(b)] for a, b in zip(d, values))))


def cmd_fade(args, ctx: RunContext) -> None:
    seed = resolve_seed(args.seed)
    if seed is None:
        seed = 0
    ctx.seeds = {"seed": seed}
    ctx.config = {k: v for k, v in vars(args).items() if k != "func"}
    ctx.config["seed"] = seed
    if args.kind == "shadow":
        cfg = fading.ShadowConfig(args.sigma, args.d_decorr, args.step)
        text = fading.trace_to_csv(fading.shadow_trace(cfg, args.n, seed), cfg.step)
    else:
        cfg = fading.RicianConfig(args.k_db, rayleigh=args.rayleigh)
        gains = fading.small_scale_gain(cfg, args.n, seed)
        text = _csv_text(["index", "gain"], ([i, _fmt(g)] for i, g in enumerate(gains)))
    ctx.write(args.out, text)


def _region(text: str) -> List[float]:
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError("--region must be xmin:xmax:ymin:ymax")
    return [float(p) for p in parts]


def cmd_localize(args, ctx: RunContext) -> None:
    measurements = localization.read_measurements_csv(Path(args.measurements).read_text(encoding="utf-8"))
    model = localization.RssiModel(args.p_ref, args.d_ref, args.n_p)
    region = localization.SearchRegion(*_region(args.region), z=args.emitter_height)
    result = localization.mle_localize(model, measurements, region, args.resolution)
    ctx.config = {k: v for k, v in vars(args).items() if k != "func"}
    x, y, z = result.position
    ctx.write(args.out, _csv_text(["x", "y", "z", "loglik"], [[_fmt(x), _fmt(y), _fmt(z), _fmt(result.loglik)]]))
    if args.map_out:
        ctx.write(args.map_out, result.map_to_csv())


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="a2g", description="UAV air-to-ground channel models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plos", help="evaluate LoS probability models on a grid")
    p.add_argument("--env", required=True, help="suburban, urban, dense or highrise")
    p.add_argument("--models", required=True, help="comma-separated model ids")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--theta-grid", help="elevation grid in degrees, start:stop:step or a list")
    g.add_argument("--r-grid", help="horizontal distance grid in meters")
    p.add_argument("--h-tx", type=float, default=300.0, help="UAV height (m)")
    p.add_argument("--h-rx", type=float, default=1.5, help="ground node height (m)")
    p.add_argument("--freq", type=float, default=2.0, help="carrier in GHz (fresnel model)")
    p.add_argument("--scenario", default="UMa", help="3GPP scenario for gpp3")
    p.add_argument("--placement", choices=mc_engine.PLACEMENTS, default="fixed_height")
    p.add_argument("--r-fixed", type=float, help="horizontal distance for fixed_range placement")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_plos)

    p = sub.add_parser("sim", help="run a Monte Carlo campaign from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help=f"master seed (overridden by ${SEED_ENV})")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("pathloss", help="evaluate a path-loss model over distances")
    p.add_argument("--model", required=True, choices=("fspl", "3gpp", "ab", "log-distance", "two-ray"))
    p.add_argument("--d-grid", required=True, help="distances in meters")
    p.add_argument("--freq", type=float, default=2.0, help="carrier in GHz")
    p.add_argument("--h-tx", type=float, default=100.0)
    p.add_argument("--h-rx", type=float, default=1.5)
    p.add_argument("--scenario", default="UMa")
    p.add_argument("--condition", default="LoS")
    p.add_argument("--study", default="", help="AB table study key")
    p.add_argument("--environment", default="", help="AB table environment substring")
    p.add_argument("--variant", default="")
    p.add_argument("--n", type=float, default=2.0, help="log-distance exponent")
    p.add_argument("--d0", type=float, default=1.0, help="log-distance reference distance (m)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pathloss)

    p = sub.add_parser("fade", help="generate shadowing traces or small-scale gains")
    p.add_argument("--kind", choices=("shadow", "rician"), required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--sigma", type=float, default=4.0, help="shadowing std (dB)")
    p.add_argument("--d-decorr", type=float, default=fading.DEFAULT_DECORR_M)
    p.add_argument("--step", type=float, default=1.0, help="sample spacing (m)")
    p.add_argument("--k-db", type=float, default=fading.DEFAULT_K_DB["los"])
    p.add_argument("--rayleigh", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fade)

    p = sub.add_parser("localize", help="grid-search ML emitter localization from RSSI")
    p.add_argument("--measurements", required=True, help="CSV with x,y,z,rssi_dbm,sigma_db")
    p.add_argument("--p-ref", type=float, required=True, help="power at d_ref (dBm)")
    p.add_argument("--d-ref", type=float, default=1.0)
    p.add_argument("--n-p", type=float, default=2.0)
    p.add_argument("--region", required=True, help="xmin:xmax:ymin:ymax in meters; write --region=-50:... for negative bounds")
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--emitter-height", type=float, default=0.0)
    p.add_argument("--out")
    p.add_argument("--map-out", help="likelihood map CSV")
    p.set_defaults(func=cmd_localize)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    ctx = RunContext(args.command, argv)
    try:
        args.func(args, ctx)
        ctx.finish()
    except (SigmoidFitError, ArithmeticError) as exc:
        print(f"a2g: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"a2g: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"a2g: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
