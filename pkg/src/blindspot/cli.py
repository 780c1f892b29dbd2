"""Command-line experiment runner.

Lengths are normalized so that R = 1; intensities are given as mean counts
in the disc (lambda0*pi*R^2 for obstacles, lambda*pi*R^2 for anchors).
Settings come from an optional ``key = value`` file and are overridden by
flags.  Output is CSV with ``#`` comment lines carrying the configuration;
wall-clock information only ever appears in comment lines.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import io
import logging
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from . import analytic, montecarlo
from .analytic import BlindSpotParams
from .design import required_anchor_intensity
from .geometry import EnvParams

log = logging.getLogger("blindspot")

MODES = ("sweep-l", "sweep-lambda", "gamma", "design", "estimate")
L_GRID = [round(0.1 * i, 10) for i in range(1, 11)]


@dataclass
class ExperimentConfig:
    mode: str
    mean_obstacles: list[float] = field(default_factory=lambda: [8.0])
    l_over_r: list[float] = field(default_factory=lambda: list(L_GRID))
    mean_anchors: list[float] = field(default_factory=lambda: [15.0])
    kv: int = 3
    mu: list[float] = field(default_factory=lambda: [0.1])
    reps: int = 50_000
    seed: int = 1
    workers: int = 1
    gamma_definition: str = "visible"
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        for name in ("mean_obstacles", "l_over_r", "mean_anchors", "mu"):
            grid = getattr(self, name)
            if not grid:
                raise ValueError(f"{name} grid is empty")
            if list(grid) != sorted(grid):
                raise ValueError(f"{name} grid must be sorted ascending")
        if self.reps < 2:
            raise ValueError("reps must be at least 2")
        if self.kv < 1:
            raise ValueError("kv must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.gamma_definition not in ("shadow", "visible"):
            raise ValueError("gamma_definition must be 'shadow' or 'visible'")
        return self

    def echo(self) -> str:
        parts = []
        for f in fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(repr(float(x)) for x in v)
            parts.append(f"{f.name}={v}")
        return " ".join(parts)


@dataclass
class SweepRow:
    param: float
    b_mc: float
    b_mc_stderr: float
    b_ind: float
    b_2plus: float
    wall_time: float = 0.0


MODE_DEFAULTS: dict[str, dict] = {
    "sweep-l": {},
    "sweep-lambda": {"l_over_r": [0.1, 0.5, 1.0], "mean_anchors": [float(x) for x in range(4, 25)]},
    "gamma": {"mean_obstacles": [2.0, 4.0, 8.0], "reps": 100_000},
    "design": {"l_over_r": [0.5], "mu": [0.1]},
    "estimate": {"l_over_r": [0.5]},
}

_LIST_KEYS = {"mean_obstacles", "l_over_r", "mean_anchors", "mu"}
_INT_KEYS = {"kv", "reps", "seed", "workers"}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _LIST_KEYS:
        return [float(v) for v in raw.replace(" ", "").split(",") if v]
    if key in _INT_KEYS:
        return int(raw)
    return raw


def read_config_file(path: str | os.PathLike) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(ExperimentConfig)} - {"mode"}
    out: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def build_config(mode: str, file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    values = dict(MODE_DEFAULTS.get(mode, {}))
    env_workers = os.environ.get(montecarlo.WORKERS_ENV)
    if env_workers:
        values["workers"] = int(env_workers)
    values.update(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig(mode=mode, **values).validate()


# --------------------------------------------------------------------------
# experiments

def _point(z: EnvParams, mean_anchors: float, cfg: ExperimentConfig) -> SweepRow:
    t0 = time.perf_counter()
    bp = BlindSpotParams.normalized(mean_anchors, z, cfg.kv)
    est = montecarlo.estimate_b(bp, cfg.reps, cfg.seed, cfg.workers)
    row = SweepRow(
        param=0.0,
        b_mc=est.mean,
        b_mc_stderr=est.stderr,
        b_ind=analytic.b_ind(bp),
        b_2plus=analytic.b_2plus(bp),
    )
    row.wall_time = time.perf_counter() - t0
    return row


def run_sweep_L(cfg: ExperimentConfig) -> list[SweepRow]:
    rows = []
    mean_anchors = cfg.mean_anchors[0]
    for lr in cfg.l_over_r:
        row = _point(EnvParams.normalized(cfg.mean_obstacles[0], lr), mean_anchors, cfg)
        row.param = lr
        log.info("L/R=%g b_mc=%.5f b_ind=%.5f b_2plus=%.5f", lr, row.b_mc, row.b_ind, row.b_2plus)
        rows.append(row)
    return rows


def run_sweep_lambda(cfg: ExperimentConfig) -> dict[float, list[SweepRow]]:
    out: dict[float, list[SweepRow]] = {}
    for lr in cfg.l_over_r:
        z = EnvParams.normalized(cfg.mean_obstacles[0], lr)
        rows = []
        for na in cfg.mean_anchors:
            row = _point(z, na, cfg)
            row.param = na
            log.info("L/R=%g lambda*pi*R^2=%g b_mc=%.5f b_2plus=%.5f", lr, na, row.b_mc, row.b_2plus)
            rows.append(row)
        out[lr] = rows
    return out


def run_gamma(cfg: ExperimentConfig) -> list[tuple[float, float, float, float]]:
    rows = []
    for count in cfg.mean_obstacles:
        for lr in cfg.l_over_r:
            est = montecarlo.estimate_gamma(
                EnvParams.normalized(count, lr), cfg.reps, cfg.seed, cfg.workers, cfg.gamma_definition
            )
            log.info("count=%g L/R=%g gamma=%.4f", count, lr, est.mean)
            rows.append((count, lr, est.mean, est.stderr))
    return rows


def run_design(cfg: ExperimentConfig) -> list[tuple]:
    z = EnvParams.normalized(cfg.mean_obstacles[0], cfg.l_over_r[0])
    rows = []
    for mu in cfg.mu:
        res = required_anchor_intensity(z, mu, cfg.kv)
        est = montecarlo.estimate_b(BlindSpotParams(res.lambda_star, z, cfg.kv), cfg.reps, cfg.seed, cfg.workers)
        rows.append((mu, res.lambda_star, res.mean_anchors(z), res.achieved, est.mean, est.stderr, res.iterations))
    return rows


# --------------------------------------------------------------------------
# CSV

def _header(cfg: ExperimentConfig, extra: Sequence[str] = ()) -> list[str]:
    lines = [f"# blindspot {cfg.mode}", f"# config {cfg.echo()}", "# R=1 (lengths normalized)"]
    lines += [f"# {e}" for e in extra]
    return lines


def render_csv(cfg: ExperimentConfig, results) -> tuple[str, list[str]]:
    """CSV text plus timing comment lines (kept out of the body)."""
    body = io.StringIO()
    timing: list[str] = []
    if cfg.mode == "sweep-l":
        body.write("L_over_R,b_mc,b_mc_stderr,b_ind,b_2plus\n")
        for r in results:
            body.write(",".join(_fmt(v) for v in (r.param, r.b_mc, r.b_mc_stderr, r.b_ind, r.b_2plus)) + "\n")
            timing.append(f"# wall_time L_over_R={_fmt(r.param)} seconds={r.wall_time:.3f}")
    elif cfg.mode == "sweep-lambda":
        body.write("L_over_R,lambda_piR2,b_mc,b_mc_stderr,b_ind,b_2plus\n")
        for lr, rows in results.items():
            for r in rows:
                vals = (lr, r.param, r.b_mc, r.b_mc_stderr, r.b_ind, r.b_2plus)
                body.write(",".join(_fmt(v) for v in vals) + "\n")
                timing.append(f"# wall_time L_over_R={_fmt(lr)} lambda_piR2={_fmt(r.param)} seconds={r.wall_time:.3f}")
    elif cfg.mode == "estimate":
        body.write("L_over_R,lambda_piR2,b_mc,b_mc_stderr,b_ind,b_2plus\n")
        for lr, rows in results.items():
            for r in rows:
                vals = (lr, r.param, r.b_mc, r.b_mc_stderr, r.b_ind, r.b_2plus)
                body.write(",".join(_fmt(v) for v in vals) + "\n")
                timing.append(f"# wall_time seconds={r.wall_time:.3f}")
    elif cfg.mode == "gamma":
        body.write("mean_obstacles,L_over_R,gamma,gamma_stderr\n")
        for row in results:
            body.write(",".join(_fmt(v) for v in row) + "\n")
    elif cfg.mode == "design":
        body.write("mu,lambda_star,lambda_piR2_star,b_2plus_achieved,b_mc,b_mc_stderr,iterations\n")
        for row in results:
            body.write(",".join(_fmt(v) for v in row[:-1]) + f",{row[-1]}\n")
    return body.getvalue(), timing


def run(cfg: ExperimentConfig):
    if cfg.mode == "sweep-l":
        return run_sweep_L(cfg)
    if cfg.mode in ("sweep-lambda", "estimate"):
        return run_sweep_lambda(cfg)
    if cfg.mode == "gamma":
        return run_gamma(cfg)
    return run_design(cfg)


def write_output(cfg: ExperimentConfig, results) -> str:
    body, timing = render_csv(cfg, results)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    text = "\n".join(_header(cfg)) + "\n" + body + "\n".join([f"# generated {stamp}"] + timing) + "\n"
    if cfg.out:
        try:
            Path(cfg.out).write_text(text)
        except OSError as exc:
            raise SystemExit(f"cannot write {cfg.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return text


def csv_body(text: str) -> str:
    """Strip comment lines, leaving the deterministic part of an output file."""
    return "".join(line + "\n" for line in text.splitlines() if not line.startswith("#"))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blindspot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", help="key=value settings file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--out")
        sp.add_argument("--kv", type=int)
        sp.add_argument("--mean-obstacles", help="lambda0*pi*R^2 (comma list for gamma)")
        sp.add_argument("--l-over-r", help="comma-separated L/R values")
        sp.add_argument("--mean-anchors", help="comma-separated lambda*pi*R^2 values")
        sp.add_argument("--mu", help="comma-separated blind-spot thresholds")
        sp.add_argument("--gamma-definition", choices=("shadow", "visible"))
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "workers": args.workers,
        "reps": args.reps,
        "out": args.out,
        "kv": args.kv,
        "gamma_definition": args.gamma_definition,
    }
    for key in ("mean_obstacles", "l_over_r", "mean_anchors", "mu"):
        raw = getattr(args, key)
        if raw is not None:
            overrides[key] = _parse_value(key, raw)
    try:
        cfg = build_config(args.mode, file_values, overrides)
    except (TypeError, ValueError) as exc:
        print(f"blindspot: {exc}", file=sys.stderr)
        return 2
    write_output(cfg, run(cfg))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
