"""Command line front end: one config file drives validation, beta scans, spectra, traces and integrals.

Every number is rounded to 12 significant digits before it is stored, so the
CSV text parses back to exactly the in-memory value.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import yaml

from .errors import ConfigError, MftraceError
from .ifs import DEFAULT_CAPACITY, IfsSystem, validate_ifs
from .measure import DEFAULT_TOL, SelfSimilarMeasure
from .multifractal import (
    beta_closed_form,
    beta_grid_estimate,
    beta_interval_estimate,
    default_grid_scales,
    default_interval_cutoffs,
    lacunarity_estimate,
    legendre_spectrum,
)
from .nc_integral import TestFunction, cell_indicator, constant, hat, identity, verify_integral
from .spectral import partial_sum_trace, renewal_constants, scale_threshold, singular_values_above

COMMANDS = ("validate", "beta", "spectrum", "trace", "integral")
GRID_TOL = 0.03
INTERVAL_TOL = 0.02
LACUNARITY_DEPTH = 8


def fmt(x: float) -> str:
    """Decimal text with 12 significant digits."""
    return f"{float(x):.12g}"


def rnd(x: float) -> float:
    return float(fmt(x))


@dataclass(frozen=True)
class RunConfig:
    ifs: IfsSystem
    weights: tuple[float, ...]
    q_grid: tuple[float, ...]
    enlargement: float | str = "auto"
    grid_enlargement: float = 1.0
    cutoffs: tuple[float, ...] | None = None
    grid_scales: tuple[float, ...] | None = None
    cdf_tol: float = DEFAULT_TOL
    root_tol: float = 1e-14
    seed: int = 0
    output: str = "out"
    quadrature_depth: int | None = None
    capacity: int = DEFAULT_CAPACITY

    @property
    def measure(self) -> SelfSimilarMeasure:
        return SelfSimilarMeasure(self.ifs, self.weights)

    def resolved_enlargement(self) -> float:
        if self.enlargement == "auto":
            lam = lacunarity_estimate(self.ifs, LACUNARITY_DEPTH)
            return float(max(6, math.ceil(2.0 / lam)))
        return float(self.enlargement)

    def resolved_cutoffs(self) -> np.ndarray:
        if self.cutoffs is None:
            return default_interval_cutoffs(self.ifs)
        return np.asarray(self.cutoffs)

    def resolved_scales(self) -> np.ndarray:
        if self.grid_scales is None:
            return default_grid_scales(self.ifs, 1e-7)
        return np.asarray(self.grid_scales)

    def resolved_depth(self) -> int:
        if self.quadrature_depth is not None:
            return self.quadrature_depth
        return min(20, int(math.log(2e6) / math.log(self.ifs.m)))


def _geometric(entry, name: str) -> tuple[float, ...] | None:
    if entry is None:
        return None
    if isinstance(entry, dict):
        try:
            start, factor, count = float(entry["start"]), float(entry["factor"]), int(entry["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: geometric form needs start, factor and count") from exc
        vals = start * factor ** np.arange(count)
    else:
        vals = np.asarray(entry, dtype=float)
    if vals.size == 0 or np.any(vals <= 0) or np.any(np.diff(vals) >= 0):
        raise ConfigError(f"{name} must be positive and strictly decreasing")
    return tuple(float(v) for v in vals)


def parse_config(data: dict) -> RunConfig:
    """Build a :class:`RunConfig` from parsed YAML or JSON."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - {
        "ifs", "weights", "q_grid", "enlargement", "grid_enlargement", "cutoffs",
        "grid_scales", "tolerances", "seed", "output", "quadrature_depth", "capacity",
    }
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "ifs" not in data:
        raise ConfigError("config needs an 'ifs' list of [ratio, translation] pairs")
    ifs = validate_ifs(data["ifs"])
    if "weights" not in data:
        raise ConfigError("config needs 'weights'")
    weights = tuple(float(w) for w in data["weights"])
    q_grid = tuple(float(q) for q in data.get("q_grid", [0.0, 1.0, 2.0]))
    if not q_grid:
        raise ConfigError("q_grid must not be empty")
    a = data.get("enlargement", "auto")
    if a != "auto":
        a = float(a)
        if not a > 0:
            raise ConfigError("enlargement must be positive or 'auto'")
    b = float(data.get("grid_enlargement", 1.0))
    if b < 0:
        raise ConfigError("grid_enlargement must be nonnegative")
    tols = data.get("tolerances") or {}
    depth = data.get("quadrature_depth")
    cfg = RunConfig(
        ifs=ifs,
        weights=weights,
        q_grid=q_grid,
        enlargement=a,
        grid_enlargement=b,
        cutoffs=_geometric(data.get("cutoffs"), "cutoffs"),
        grid_scales=_geometric(data.get("grid_scales"), "grid_scales"),
        cdf_tol=float(tols.get("cdf", DEFAULT_TOL)),
        root_tol=float(tols.get("root", 1e-14)),
        seed=int(data.get("seed", 0)),
        output=str(data.get("output", "out")),
        quadrature_depth=None if depth is None else int(depth),
        capacity=int(data.get("capacity", DEFAULT_CAPACITY)),
    )
    cfg.measure  # weights are checked against the system here
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    try:
        return parse_config(data)
    except MftraceError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


def _per_q(cfg: RunConfig, job: Callable[[float], dict], threads: int) -> list[dict]:
    # results come back in q order whatever the thread count
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(job, cfg.q_grid))


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_text(row[c]) for c in columns])


def _text(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return fmt(v)


def read_csv(path: str | Path) -> list[dict]:
    """Parse a CSV written by :func:`write_csv` back into floats and booleans."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    conv = {"true": True, "false": False}
    return [{k: conv[v] if v in conv else float(v) for k, v in r.items()} for r in rows]


def cmd_validate(cfg: RunConfig) -> dict:
    ifs = cfg.ifs
    return {
        "m": ifs.m,
        "ratios": [rnd(r) for r in ifs.ratios],
        "translations": [rnd(t) for t in ifs.translations],
        "gaps": [rnd(g) for g in ifs.gap_lengths],
        "s": rnd(beta_closed_form(cfg.weights, ifs.ratios, 0.0, cfg.root_tol)),
        "lacunarity": rnd(lacunarity_estimate(ifs, LACUNARITY_DEPTH)),
    }


BETA_COLUMNS = (
    "q", "beta_closed", "beta_grid", "beta_grid_stderr",
    "beta_interval", "beta_interval_bracket", "agreement_flag",
)


def cmd_beta_scan(cfg: RunConfig, threads: int = 1) -> list[dict]:
    mu = cfg.measure
    a = cfg.resolved_enlargement()
    scales = cfg.resolved_scales()
    cutoffs = cfg.resolved_cutoffs()

    def job(q: float) -> dict:
        closed = beta_closed_form(cfg.weights, cfg.ifs.ratios, q, cfg.root_tol)
        grid = beta_grid_estimate(mu, q, cfg.grid_enlargement, scales, cfg.cdf_tol)
        interval = beta_interval_estimate(mu, q, a, cutoffs, cfg.cdf_tol, capacity=cfg.capacity)
        agree = abs(grid.value - closed) <= GRID_TOL and abs(interval.value - closed) <= INTERVAL_TOL
        return {
            "q": rnd(q),
            "beta_closed": rnd(closed),
            "beta_grid": rnd(grid.value),
            "beta_grid_stderr": rnd(grid.stderr),
            "beta_interval": rnd(interval.value),
            "beta_interval_bracket": rnd(interval.bracket_width),
            "agreement_flag": bool(agree),
        }

    return _per_q(cfg, job, threads)


def cmd_spectrum(cfg: RunConfig) -> list[dict]:
    """Legendre transform of the closed-form ``beta`` over ``q_grid``."""
    pairs = [(q, beta_closed_form(cfg.weights, cfg.ifs.ratios, q, cfg.root_tol)) for q in cfg.q_grid]
    return [{"alpha": rnd(p.alpha), "f": rnd(p.f)} for p in legendre_spectrum(pairs)]


TRACE_COLUMNS = (
    "q", "beta_used", "c_closed_form", "r0", "trace_point",
    "trace_band_lo", "trace_band_hi", "measurable_consistent",
)


def cmd_trace(cfg: RunConfig, threads: int = 1) -> list[dict]:
    mu = cfg.measure
    a = cfg.resolved_enlargement()
    tau = scale_threshold(cfg.ifs, float(cfg.resolved_cutoffs()[-1]))

    def job(q: float) -> dict:
        beta = beta_closed_form(cfg.weights, cfg.ifs.ratios, q, cfg.root_tol)
        consts = renewal_constants(mu, q, a, beta, cfg.cdf_tol, cfg.capacity)
        svs = singular_values_above(mu, q, beta, a, tau, "symmetric", cfg.cdf_tol, cfg.capacity)
        est = partial_sum_trace(svs)
        return {
            "q": rnd(q),
            "beta_used": rnd(beta),
            "c_closed_form": rnd(consts.c),
            "r0": rnd(consts.r0),
            "trace_point": rnd(est.point),
            "trace_band_lo": rnd(est.band[0]),
            "trace_band_hi": rnd(est.band[1]),
            "measurable_consistent": est.measurable_consistent,
        }

    return _per_q(cfg, job, threads)


def make_function(name: str, params: dict, ifs: IfsSystem) -> TestFunction:
    """Test function by name: constant, identity, indicator or hat."""
    try:
        if name == "constant":
            return constant(float(params.get("value", 1.0)))
        if name == "identity":
            return identity()
        if name == "indicator":
            word = str(params.get("word", "0"))
            letters = tuple(int(c) for c in word.replace(",", " ").split())
            if any(not 0 <= i < ifs.m for i in letters):
                raise ConfigError(f"word {word} uses letters outside 0..{ifs.m - 1}")
            return cell_indicator(ifs, letters)
        if name == "hat":
            return hat(float(params["center"]), float(params["width"]), float(params.get("height", 1.0)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad parameters for function {name}: {exc}") from exc
    raise ConfigError(f"unknown function {name!r}")


INTEGRAL_COLUMNS = ("q", "lhs_trace", "rhs_c_nu", "rel_discrepancy", "budget")


def cmd_integral(cfg: RunConfig, f: TestFunction, threads: int = 1) -> list[dict]:
    mu = cfg.measure
    a = cfg.resolved_enlargement()
    delta = float(cfg.resolved_cutoffs()[-1])
    depth = cfg.resolved_depth()

    def job(q: float) -> dict:
        rep = verify_integral(f, mu, q, a, delta, depth, cfg.cdf_tol, cfg.capacity)
        return {
            "q": rnd(q),
            "lhs_trace": rnd(rep.lhs),
            "rhs_c_nu": rnd(rep.rhs),
            "rel_discrepancy": rnd(rep.rel_discrepancy),
            "budget": rnd(rep.budget),
        }

    return _per_q(cfg, job, threads)


def _fparams(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--fparam expects K=V, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mftrace", description="Multifractal traces of self-similar measures.")
    p.add_argument("--config", required=True, help="YAML or JSON run configuration")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for per-q jobs")
    p.add_argument("--function", default="constant", help="test function for 'integral'")
    p.add_argument("--fparam", action="append", default=[], metavar="K=V", help="test function parameter")
    return p


def run(args: argparse.Namespace) -> Path | None:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.output)
    if args.command == "validate":
        summary = cmd_validate(cfg)
        out.mkdir(parents=True, exist_ok=True)
        text = json.dumps(summary, indent=2)
        (out / "validate.json").write_text(text + "\n")
        print(text)
        return out / "validate.json"
    if args.command == "beta":
        path = out / "beta.csv"
        write_csv(path, BETA_COLUMNS, cmd_beta_scan(cfg, args.threads))
    elif args.command == "spectrum":
        path = out / "spectrum.csv"
        write_csv(path, ("alpha", "f"), cmd_spectrum(cfg))
    elif args.command == "trace":
        path = out / "trace.csv"
        write_csv(path, TRACE_COLUMNS, cmd_trace(cfg, args.threads))
    else:
        f = make_function(args.function, _fparams(args.fparam), cfg.ifs)
        path = out / "integral.csv"
        write_csv(path, INTEGRAL_COLUMNS, cmd_integral(cfg, f, args.threads))
    print(path)
    return path


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("ConfigError: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        run(args)
    except MftraceError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # argument checks deeper down (too few q samples and the like)
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
