"""Random support models.

Three families are supported: independent per-coordinate Bernoulli
inclusion, finite mixtures of explicit supports, and empirical mask
collections (e.g. read from a mask file).  Supports are returned as sorted
zero-based index arrays, or as boolean ``(n, d)`` masks for batches.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .weights import BETA_CLIP

log = logging.getLogger(__name__)


class MaskFormatError(ValueError):
    """Malformed mask file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, eq=False)
class IndependentBernoulli:
    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or beta.size == 0:
            raise ValueError("beta must be a non-empty 1-D vector")
        if np.any(beta < 0) or np.any(beta > 1):
            raise ValueError("Bernoulli parameters must lie in [0, 1]")
        object.__setattr__(self, "beta", beta)

    @property
    def d(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True, eq=False)
class FiniteMixture:
    d: int
    supports: tuple
    probs: np.ndarray

    def __post_init__(self):
        supports = tuple(tuple(sorted(set(int(i) for i in s))) for s in self.supports)
        probs = np.asarray(self.probs, dtype=float)
        if len(supports) == 0 or probs.shape != (len(supports),):
            raise ValueError("need one probability per support")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("mixture probabilities must be nonnegative and sum to 1")
        for s in supports:
            if s and (s[0] < 0 or s[-1] >= self.d):
                raise ValueError(f"support index out of range for d={self.d}")
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "probs", probs)
        masks = np.zeros((len(supports), self.d), dtype=bool)
        for r, s in enumerate(supports):
            masks[r, list(s)] = True
        object.__setattr__(self, "_masks", masks)


@dataclass(frozen=True, eq=False)
class Empirical:
    masks: np.ndarray

    def __post_init__(self):
        masks = np.asarray(self.masks, dtype=bool)
        if masks.ndim != 2 or masks.shape[0] == 0 or masks.shape[1] == 0:
            raise ValueError("need at least one mask of positive length")
        object.__setattr__(self, "masks", masks)

    @property
    def d(self) -> int:
        return self.masks.shape[1]

    def subset(self, rows) -> "Empirical":
        """Empirical model over a subset of the masks (e.g. leave-one-out)."""
        return Empirical(self.masks[np.asarray(rows)])


SupportDistribution = IndependentBernoulli | FiniteMixture | Empirical


def sample_masks(dist: SupportDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` supports as a boolean ``(n, d)`` array."""
    if isinstance(dist, IndependentBernoulli):
        return rng.random((n, dist.d)) < dist.beta
    if isinstance(dist, FiniteMixture):
        rows = rng.choice(len(dist.supports), size=n, p=dist.probs)
        return dist._masks[rows]
    if isinstance(dist, Empirical):
        rows = rng.integers(0, dist.masks.shape[0], size=n)
        return dist.masks[rows]
    raise TypeError(f"unknown support distribution {type(dist).__name__}")


def sample_support(dist: SupportDistribution, rng: np.random.Generator) -> np.ndarray:
    return np.flatnonzero(sample_masks(dist, rng, 1)[0])


def beta_of(dist: SupportDistribution, clip: bool = True) -> np.ndarray:
    """Marginal inclusion probabilities.

    Exact for Bernoulli and mixture models, per-coordinate frequency for
    empirical ones.  Frequencies of exactly 0 or 1 are clipped (with a
    warning) unless ``clip`` is false.
    """
    if isinstance(dist, IndependentBernoulli):
        beta = dist.beta.copy()
    elif isinstance(dist, FiniteMixture):
        beta = dist.probs @ dist._masks.astype(float)
    elif isinstance(dist, Empirical):
        beta = dist.masks.mean(axis=0)
    else:
        raise TypeError(f"unknown support distribution {type(dist).__name__}")
    if clip:
        clipped = np.clip(beta, BETA_CLIP, 1.0 - BETA_CLIP)
        if np.any(clipped != beta):
            log.warning("clipped %d marginal probabilities away from 0/1", int(np.sum(clipped != beta)))
        beta = clipped
    return beta


def bernoulli_blocks(d: int, n_blocks: int, params) -> IndependentBernoulli:
    """Equal-length blocks of i.i.d. Bernoulli coordinates."""
    params = np.asarray(params, dtype=float)
    if n_blocks < 1 or d % n_blocks:
        raise ValueError(f"{n_blocks} blocks do not divide d={d}")
    if params.shape != (n_blocks,):
        raise ValueError("need one parameter per block")
    if np.any(params <= 0) or np.any(params >= 1):
        raise ValueError("block parameters must lie in (0, 1)")
    return IndependentBernoulli(np.repeat(params, d // n_blocks))


def geometric_blocks(d: int = 128, n_blocks: int = 8) -> IndependentBernoulli:
    """Blocks with parameters ``2^-1, ..., 2^-n_blocks``."""
    return bernoulli_blocks(d, n_blocks, 2.0 ** -np.arange(1, n_blocks + 1))


FOUR_SUPPORT_RANGES = ((0, 8), (4, 20), (16, 40), (24, 64))


def four_support_mixture() -> FiniteMixture:
    """Equiprobable mixture of four overlapping supports of sizes 8, 16, 24, 40 in d=64.

    Every coordinate lies in one or two of the supports, so all marginals
    are 1/4 or 1/2.
    """
    supports = [range(lo, hi) for lo, hi in FOUR_SUPPORT_RANGES]
    return FiniteMixture(64, supports, np.full(4, 0.25))


def load_masks(path) -> Empirical:
    """Read a mask file: one line per sample, exactly ``d`` characters in {0,1}."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise MaskFormatError("mask file is empty")
    d = None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        bad = set(line) - {"0", "1"}
        if bad or not line:
            raise MaskFormatError(f"expected only 0/1 characters, got {line!r}", lineno)
        if d is None:
            d = len(line)
        elif len(line) != d:
            raise MaskFormatError(f"expected {d} characters, got {len(line)}", lineno)
        rows.append([c == "1" for c in line])
    return Empirical(np.array(rows, dtype=bool))


def save_masks(masks, path) -> None:
    masks = np.asarray(masks, dtype=bool)
    Path(path).write_text("".join("".join("1" if v else "0" for v in row) + "\n" for row in masks))


def _fmt_floats(xs) -> str:
    return ",".join(repr(float(x)) for x in xs)


def _parse_floats(s: str) -> np.ndarray:
    return np.array([float(x) for x in s.replace(" ", "").split(",") if x], dtype=float)


def _parse_indices(s: str) -> list[int]:
    """``"0-3,7"`` -> ``[0, 1, 2, 3, 7]`` (ranges inclusive)."""
    out: list[int] = []
    for tok in s.replace(" ", "").split(","):
        if not tok:
            continue
        if "-" in tok:
            lo, hi = tok.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return out


def to_config(dist: SupportDistribution) -> dict[str, str]:
    """Flat string mapping suitable for a config-file section."""
    if isinstance(dist, IndependentBernoulli):
        return {"kind": "bernoulli", "beta": _fmt_floats(dist.beta)}
    if isinstance(dist, FiniteMixture):
        supports = ";".join(",".join(str(i) for i in s) for s in dist.supports)
        return {"kind": "mixture", "d": str(dist.d), "supports": supports, "probs": _fmt_floats(dist.probs)}
    if isinstance(dist, Empirical):
        masks = ";".join("".join("1" if v else "0" for v in row) for row in dist.masks)
        return {"kind": "empirical", "masks": masks}
    raise TypeError(f"unknown support distribution {type(dist).__name__}")


def from_config(cfg, base_dir=None) -> SupportDistribution:
    """Build a distribution from a config section (see README for keys)."""
    kind = cfg.get("kind", "").strip()
    if kind == "bernoulli":
        return IndependentBernoulli(_parse_floats(cfg["beta"]))
    if kind == "bernoulli_blocks":
        return bernoulli_blocks(int(cfg["d"]), int(cfg["n_blocks"]), _parse_floats(cfg["params"]))
    if kind == "geometric_blocks":
        return geometric_blocks(int(cfg.get("d", 128)), int(cfg.get("n_blocks", 8)))
    if kind == "mixture":
        supports = [_parse_indices(s) for s in cfg["supports"].split(";")]
        if "probs" in cfg:
            probs = _parse_floats(cfg["probs"])
        else:
            probs = np.full(len(supports), 1.0 / len(supports))
        return FiniteMixture(int(cfg["d"]), supports, probs)
    if kind == "point":
        return FiniteMixture(int(cfg["d"]), [_parse_indices(cfg.get("support", ""))], [1.0])
    if kind == "four_support":
        return four_support_mixture()
    if kind == "empirical":
        rows = [r.strip() for r in cfg["masks"].split(";")]
        return Empirical(np.array([[c == "1" for c in r] for r in rows], dtype=bool))
    if kind == "masks":
        path = Path(cfg["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return load_masks(path)
    raise ValueError(f"unknown distribution kind {kind!r}")


def dimension(dist: SupportDistribution) -> int:
    return dist.d
