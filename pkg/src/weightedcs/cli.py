"""Command-line driver: ``weightedcs {weights,volumes,phase,descend,histogram}``.

Experiments are described by an INI-style config file (see README).  All
randomness derives from one master seed through named substreams, and
every CSV starts with a ``#`` line recording the command, seed, config
hash and package version, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import substream
from .distributions import IndependentBernoulli, beta_of, from_config
from .estimators import estimate_intrinsic_volumes, failure_probability, per_support_delta_histogram
from .gradient import DescentConfig, descend
from .recovery import LP_TOL, SUCCESS_TOL, phase_transition_curve
from .weights import weights_from_beta

log = logging.getLogger("weightedcs")

COMMANDS = ("weights", "volumes", "phase", "descend", "histogram")


class ConfigError(ValueError):
    pass


def parse_grid(text: str, d: int) -> list[int]:
    """``"10-120:10"`` (inclusive range with step) or ``"1,2,5"``."""
    out: list[int] = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        if "-" in tok:
            span, _, step = tok.partition(":")
            lo, hi = (int(v) for v in span.split("-"))
            out.extend(range(lo, hi + 1, int(step or 1)))
        else:
            out.append(int(tok))
    bad = [m for m in out if not 1 <= m <= d]
    if bad:
        raise ConfigError(f"m_grid entries {bad} outside 1..{d}")
    return out


def _read_beta_file(path: Path) -> np.ndarray:
    vals = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#")[0].strip()
        if not line:
            continue
        try:
            vals.extend(float(v) for v in line.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if not vals:
        raise ConfigError(f"{path}: no probabilities found")
    return np.array(vals)


def _read_weight_file(path: Path) -> np.ndarray:
    rows = [r for r in path.read_text().splitlines() if r and not r.startswith("#")]
    reader = csv.DictReader(rows)
    col = "lambda" if "lambda" in (reader.fieldnames or []) else "weight"
    try:
        return np.array([float(r[col]) for r in reader])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: cannot read weights ({exc})") from None


@dataclass
class ExperimentConfig:
    dist: object
    d: int
    seed: int = 0
    weight_source: str = "theorem"
    weight_path: Path | None = None
    weight_tol: float = 1e-10
    m_grid: list = field(default_factory=list)
    trials: int = 100
    magnitudes: str = "gaussian"
    n_supports: int = 1000
    n_points: int = 100
    hist_supports: int = 1000
    hist_points: int = 100
    descent: DescentConfig = field(default_factory=DescentConfig)
    descent_init: str = "unit"
    success_tol: float = SUCCESS_TOL
    lp_tol: float = LP_TOL
    out: Path = Path(".")
    workers: int = 1
    digest: str = ""


def load_config(path, overrides=None) -> ExperimentConfig:
    """Parse a config file; ``overrides`` maps CLI flag names to values."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser()
    cp.read_string(path.read_text())
    base = path.parent

    if not cp.has_section("distribution"):
        raise ConfigError("config needs a [distribution] section")
    dsec = dict(cp["distribution"])
    if dsec.get("kind") == "beta_file":
        bpath = base / dsec["path"]
        if not bpath.exists():
            raise ConfigError(f"beta file {bpath} does not exist")
        dist = IndependentBernoulli(_read_beta_file(bpath))
    else:
        if dsec.get("kind") == "masks" and not (base / dsec.get("path", "")).exists():
            raise ConfigError(f"mask file {base / dsec.get('path', '')} does not exist")
        try:
            dist = from_config(dsec, base_dir=base)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"[distribution]: {exc}") from None
    d = dist.d

    def get(section, key, conv, default):
        if cp.has_section(section) and key in cp[section]:
            try:
                return conv(cp[section][key])
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
        return default

    cfg = ExperimentConfig(dist=dist, d=d)
    cfg.seed = int(overrides.get("seed", get("experiment", "seed", int, 0)))
    cfg.weight_source = get("weights", "source", str, "theorem").strip()
    if cfg.weight_source not in ("unit", "theorem", "file", "descend"):
        raise ConfigError(f"unknown weight source {cfg.weight_source!r}")
    if cfg.weight_source == "file":
        wp = get("weights", "path", str, None)
        if wp is None or not (base / wp).exists():
            raise ConfigError(f"weight file {wp!r} does not exist")
        cfg.weight_path = base / wp
    cfg.weight_tol = get("weights", "tol", float, 1e-10)
    cfg.m_grid = parse_grid(get("phase", "m_grid", str, f"1-{d}"), d)
    cfg.trials = get("phase", "trials", int, 100)
    cfg.magnitudes = get("phase", "magnitudes", str, "gaussian").strip()
    cfg.n_supports = get("volumes", "n_supports", int, 1000)
    cfg.n_points = get("volumes", "n_points", int, 100)
    cfg.hist_supports = get("histogram", "n_supports", int, 1000)
    cfg.hist_points = get("histogram", "n_points", int, 100)
    cfg.workers = int(overrides.get("workers", 1))
    cfg.descent = DescentConfig(
        n_grad_samples=get("descend", "n_grad_samples", int, 20000),
        n_eval_samples=get("descend", "n_eval_samples", int, 20000),
        initial_step=get("descend", "initial_step", float, 1.0),
        max_iters=get("descend", "max_iters", int, 20),
        min_step=get("descend", "min_step", float, 1e-3),
        seed=int(substream(cfg.seed, "descend").integers(0, 2**63)),
        workers=cfg.workers,
    )
    cfg.descent_init = get("descend", "init", str, "unit").strip()
    if cfg.descent_init not in ("unit", "theorem"):
        raise ConfigError(f"[descend] init must be unit or theorem, got {cfg.descent_init!r}")
    cfg.success_tol = float(overrides.get("success_tol", get("tolerances", "success_tol", float, SUCCESS_TOL)))
    cfg.lp_tol = float(overrides.get("lp_tol", get("tolerances", "lp_tol", float, LP_TOL)))
    cfg.out = Path(overrides.get("out", get("experiment", "out", str, ".")))

    buf = io.StringIO()
    cp.write(buf)
    resolved = f"{buf.getvalue()}\nseed={cfg.seed}\nsuccess_tol={cfg.success_tol!r}\nlp_tol={cfg.lp_tol!r}\n"
    cfg.digest = hashlib.sha256(resolved.encode()).hexdigest()[:16]
    return cfg


def _seed(cfg: ExperimentConfig, name: str) -> int:
    return int(substream(cfg.seed, name).integers(0, 2**63))


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def write_csv(path: Path, command: str, cfg: ExperimentConfig, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# weightedcs {__version__} command={command} seed={cfg.seed} config_sha256={cfg.digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    log.info("wrote %s", path)
    return path


def resolve_weights(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.weight_source == "unit":
        return np.ones(cfg.d)
    if cfg.weight_source == "theorem":
        return weights_from_beta(beta_of(cfg.dist), cfg.weight_tol)
    if cfg.weight_source == "file":
        w = _read_weight_file(cfg.weight_path)
        if w.shape != (cfg.d,) or np.any(w <= 0):
            raise ConfigError(f"weight file must hold {cfg.d} positive weights")
        return w
    return descend(cfg.dist, np.ones(cfg.d), cfg.descent).w


def descent_start(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.descent_init == "theorem":
        return weights_from_beta(beta_of(cfg.dist), cfg.weight_tol)
    return np.ones(cfg.d)


def cmd_weights(cfg: ExperimentConfig) -> list[Path]:
    beta = beta_of(cfg.dist)
    lam = weights_from_beta(beta, cfg.weight_tol)
    rows = [(i, beta[i], lam[i]) for i in range(cfg.d)]
    return [write_csv(cfg.out / "weights.csv", "weights", cfg, ["index", "beta", "lambda"], rows)]


def cmd_volumes(cfg: ExperimentConfig) -> list[Path]:
    w = resolve_weights(cfg)
    v = estimate_intrinsic_volumes(cfg.dist, w, cfg.n_supports, cfg.n_points, _seed(cfg, "volumes"), cfg.workers)
    nu, t, h, ci = v.nu_bar, v.t_bar, v.h_bar, v.ci_half_width
    rows = [(k, int(v.counts[k]), nu[k], t[k], h[k], "" if np.isnan(ci[k]) else _fmt(ci[k])) for k in range(cfg.d + 1)]
    return [write_csv(cfg.out / "volumes.csv", "volumes", cfg, ["k", "count", "nu_bar", "t_bar", "h_bar", "ci"], rows)]


def cmd_phase(cfg: ExperimentConfig) -> list[Path]:
    w = resolve_weights(cfg)
    curve = phase_transition_curve(cfg.dist, w, cfg.m_grid, cfg.trials, _seed(cfg, "phase"), cfg.magnitudes,
                                   cfg.success_tol, cfg.lp_tol, cfg.workers)
    rows = [(p.m, p.trials, p.successes, p.frequency, p.solver_failures) for p in curve]
    out = [write_csv(cfg.out / "phase.csv", "phase", cfg, ["m", "trials", "successes", "frequency", "solver_failures"], rows)]
    v = estimate_intrinsic_volumes(cfg.dist, w, cfg.n_supports, cfg.n_points, _seed(cfg, "phase-volumes"), cfg.workers)
    pred = [(m, 1.0 - failure_probability(v, m)) for m in cfg.m_grid]
    out.append(write_csv(cfg.out / "predicted.csv", "phase", cfg, ["m", "predicted"], pred))
    return out


def cmd_descend(cfg: ExperimentConfig) -> list[Path]:
    res = descend(cfg.dist, descent_start(cfg), cfg.descent)
    header = ["iter", "step", "delta_bar", "stderr", "status"] + [f"w{i}" for i in range(cfg.d)]
    rows = [[s.iteration, s.step, s.delta, s.stderr, "start" if s.iteration == 0 else "accepted", *s.w] for s in res.steps]
    last = res.steps[-1]
    rows.append([last.iteration + 1, 0.0, last.delta, last.stderr, "stop: " + res.reason, *last.w])
    traj = write_csv(cfg.out / "trajectory.csv", "descend", cfg, header, rows)
    beta = beta_of(cfg.dist)
    final = write_csv(cfg.out / "weights.csv", "descend", cfg, ["index", "beta", "lambda"],
                      [(i, beta[i], res.w[i]) for i in range(cfg.d)])
    return [traj, final]


def cmd_histogram(cfg: ExperimentConfig) -> list[Path]:
    w = resolve_weights(cfg)
    hist = per_support_delta_histogram(cfg.dist, w, cfg.hist_supports, cfg.hist_points, _seed(cfg, "histogram"),
                                       workers=cfg.workers)
    rows = [(i, h.support.size, h.mean, h.stderr, " ".join(str(j) for j in h.support)) for i, h in enumerate(hist)]
    return [write_csv(cfg.out / "deltahist.csv", "histogram", cfg, ["sample", "k", "delta", "stderr", "support"], rows)]


HANDLERS = {
    "weights": cmd_weights,
    "volumes": cmd_volumes,
    "phase": cmd_phase,
    "descend": cmd_descend,
    "histogram": cmd_histogram,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weightedcs", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, help="master seed (overrides [experiment] seed)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for sampling")
    p.add_argument("--out", help="output directory")
    p.add_argument("--success-tol", type=float, help=f"relative recovery tolerance (default {SUCCESS_TOL:g})")
    p.add_argument("--lp-tol", type=float, help=f"interior-point KKT tolerance (default {LP_TOL:g})")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, {
            "seed": args.seed, "workers": args.workers, "out": args.out,
            "success_tol": args.success_tol, "lp_tol": args.lp_tol,
        })
        for path in HANDLERS[args.command](cfg):
            print(path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
