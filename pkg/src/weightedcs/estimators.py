"""Monte Carlo estimators for random descent cones of weighted l1 norms.

Every Gaussian sample is drawn directly in the cone-adapted basis: only the
``e0'`` coefficient and the complement coordinates are needed for the face
dimension, and the lineality part contributes exactly ``k - 1`` to the
expected squared norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import chunk_sizes, run_chunks, substream
from .cone import face_dimension_batch, projection_batch
from .distributions import sample_masks

CI_MIN_COUNT = 10
Z95 = 1.959963984540054


def project_masks(masks: np.ndarray, w, z0: np.ndarray, g: np.ndarray):
    """Face dimensions and squared projection norms for a batch of supports.

    ``masks`` (n, d) selects the support of each row, ``z0`` (n,) is the
    ``e0'`` coefficient and ``g`` (n, d) supplies the complement
    coordinates (entries on the support are ignored).  Squared norms carry
    the lineality contribution ``k - 1`` as its expectation, not as a
    sample.

    Empty supports give the zero cone; full supports give a halfspace,
    entered when ``z0 >= 0``.
    """
    w = np.asarray(w, dtype=float)
    n, d = masks.shape
    k = masks.sum(axis=1)
    face = np.zeros(n, dtype=np.int64)
    sq = np.zeros(n)

    full = k == d
    face[full] = np.where(z0[full] >= 0, d, d - 1)
    sq[full] = (d - 1) + np.maximum(z0[full], 0.0) ** 2

    mid = (k > 0) & (k < d)
    if np.any(mid):
        mk = masks[mid]
        a = np.sqrt(np.sum(np.where(mk, w * w, 0.0), axis=1))
        absz = np.abs(g[mid])
        wts = np.broadcast_to(w, absz.shape)
        res = projection_batch(a, z0[mid], absz, wts, valid=~mk)
        km = k[mid]
        face[mid] = np.where(res["m"] > res["nJ"], d, res["m"] + km - 1)
        sq[mid] = res["sq_perp"] + (km - 1)
    return face, sq


def _draw(dist, w, seed, chunk, size):
    rng = substream(seed, chunk)
    masks = sample_masks(dist, rng, size)
    z0 = rng.standard_normal(size)
    g = rng.standard_normal((size, masks.shape[1]))
    return masks, z0, g


def sample_face_dimension(dist, w, rng: np.random.Generator) -> int:
    """One draw of the face dimension for a random support and Gaussian point."""
    masks = sample_masks(dist, rng, 1)
    d = masks.shape[1]
    k = int(masks.sum())
    if k == 0:
        return 0
    if k == d:
        return d if rng.random() < 0.5 else d - 1
    mask = masks[0]
    w = np.asarray(w, dtype=float)
    a = math.sqrt(float(np.sum(w[mask] ** 2)))
    z0 = rng.standard_normal(1)
    zJ = rng.standard_normal(d - k)
    return int(face_dimension_batch([a], z0, np.abs(zJ)[None, :], w[~mask][None, :], [k])[0])


@dataclass
class DeltaEstimate:
    mean: float
    stderr: float
    n: int
    mode: str


def _moments(dist, w, seed, chunk, size):
    masks, z0, g = _draw(dist, w, seed, chunk, size)
    face, sq = project_masks(masks, w, z0, g)
    face = face.astype(float)
    return np.array([face.sum(), (face * face).sum(), sq.sum(), (sq * sq).sum()])


def _summarise(total, n, mode):
    s, ss = (total[0], total[1]) if mode == "face" else (total[2], total[3])
    mean = s / n
    var = max(ss / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
    return DeltaEstimate(mean=float(mean), stderr=float(math.sqrt(var / n)), n=n, mode=mode)


def estimate_expected_delta_both(dist, w, n: int, seed: int, workers: int = 1):
    """Face-dimension and squared-norm estimates from the same draws."""
    if n < 1:
        raise ValueError("n must be positive")
    w = np.asarray(w, dtype=float)
    tasks = [(dist, w, seed, i, size) for i, size in enumerate(chunk_sizes(n))]
    total = np.sum(run_chunks(_moments, tasks, workers), axis=0)
    return _summarise(total, n, "face"), _summarise(total, n, "norm")


def estimate_expected_delta(dist, w, n: int, mode: str = "face", seed: int = 0, workers: int = 1) -> DeltaEstimate:
    """Expected statistical dimension over the random support.

    ``mode="face"`` averages face dimensions; ``mode="norm"`` averages
    squared projection norms (lower variance when supports are large).
    """
    if mode not in ("face", "norm"):
        raise ValueError(f"unknown mode {mode!r}")
    face, norm = estimate_expected_delta_both(dist, w, n, seed, workers)
    return face if mode == "face" else norm


def delta_samples(dist, w, n: int, seed: int, mode: str = "norm") -> np.ndarray:
    """Per-sample values behind :func:`estimate_expected_delta` (for paired comparisons)."""
    w = np.asarray(w, dtype=float)
    out = []
    for i, size in enumerate(chunk_sizes(n)):
        masks, z0, g = _draw(dist, w, seed, i, size)
        face, sq = project_masks(masks, w, z0, g)
        out.append(face.astype(float) if mode == "face" else sq)
    return np.concatenate(out)


@dataclass
class VolumeEstimate:
    """Histogram of face dimensions with derived intrinsic-volume estimates."""

    counts: np.ndarray
    n: int

    @property
    def d(self) -> int:
        return self.counts.shape[0] - 1

    @property
    def nu_bar(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def t_bar(self) -> np.ndarray:
        return np.cumsum(self.counts[::-1])[::-1] / self.n

    @property
    def h_bar(self) -> np.ndarray:
        """``h_k`` for ``k = 0..d+1`` (the last entry is 0)."""
        c = np.append(self.counts, [0, 0])
        h = np.zeros(self.d + 3)
        for k in range(self.d, -1, -1):
            h[k] = c[k] + h[k + 2]
        return h[: self.d + 2] / self.n

    def half_tail(self, k: int) -> float:
        if k > self.d:
            return 0.0
        return float(self.h_bar[k])

    def binomial_sd(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.sqrt(p * (1.0 - p) / self.n)

    @property
    def ci_half_width(self) -> np.ndarray:
        """95% normal-approximation half-widths; nan for bins under 10 counts."""
        hw = Z95 * self.binomial_sd(self.nu_bar)
        return np.where(self.counts >= CI_MIN_COUNT, hw, np.nan)


def _volume_chunk(dist, w, seed, chunk, n_sup, n_pts):
    rng = substream(seed, chunk)
    masks = sample_masks(dist, rng, n_sup)
    d = masks.shape[1]
    rep = np.repeat(masks, n_pts, axis=0)
    z0 = rng.standard_normal(rep.shape[0])
    g = rng.standard_normal(rep.shape)
    face, _ = project_masks(rep, w, z0, g)
    return np.bincount(face, minlength=d + 1)


def estimate_intrinsic_volumes(dist, w, n_supports: int = 1000, n_points: int = 100, seed: int = 0, workers: int = 1) -> VolumeEstimate:
    """Nested sampling: ``n_points`` Gaussian points for each of ``n_supports`` supports."""
    if n_supports < 1 or n_points < 1:
        raise ValueError("n_supports and n_points must be positive")
    w = np.asarray(w, dtype=float)
    per_chunk = max(1, 8192 // n_points)
    tasks = [(dist, w, seed, i, s, n_points) for i, s in enumerate(chunk_sizes(n_supports, per_chunk))]
    counts = np.sum(run_chunks(_volume_chunk, tasks, workers), axis=0)
    return VolumeEstimate(counts=counts.astype(np.int64), n=n_supports * n_points)


def failure_probability(v: VolumeEstimate, m: int) -> float:
    """``2 h_{m+1}``: probability that ``m`` Gaussian measurements fail."""
    if not 0 <= m <= v.d:
        raise ValueError(f"m must lie in 0..{v.d}")
    return 2.0 * v.half_tail(m + 1)


@dataclass
class SupportDelta:
    support: np.ndarray
    mean: float
    stderr: float


def _hist_chunk(dist, w, seed, chunk, n_sup, n_pts, mode):
    rng = substream(seed, chunk)
    masks = sample_masks(dist, rng, n_sup)
    rep = np.repeat(masks, n_pts, axis=0)
    z0 = rng.standard_normal(rep.shape[0])
    g = rng.standard_normal(rep.shape)
    face, sq = project_masks(rep, w, z0, g)
    vals = (face.astype(float) if mode == "face" else sq).reshape(n_sup, n_pts)
    mean = vals.mean(axis=1)
    sd = vals.std(axis=1, ddof=1) if n_pts > 1 else np.zeros(n_sup)
    return masks, mean, sd / math.sqrt(n_pts)


def per_support_delta_histogram(dist, w, n_supports: int = 1000, n_points: int = 100, seed: int = 0, mode: str = "face", workers: int = 1) -> list[SupportDelta]:
    """Statistical-dimension estimate of each sampled support's cone."""
    w = np.asarray(w, dtype=float)
    per_chunk = max(1, 8192 // n_points)
    tasks = [(dist, w, seed, i, s, n_points, mode) for i, s in enumerate(chunk_sizes(n_supports, per_chunk))]
    out = []
    for masks, mean, se in run_chunks(_hist_chunk, tasks, workers):
        for row, mu, s in zip(masks, mean, se):
            out.append(SupportDelta(np.flatnonzero(row), float(mu), float(s)))
    return out


def hoeffding_samples(eps: float, t: float, d: int) -> int:
    """Samples guaranteeing ``P(|estimate - delta| > t) <= eps`` for values in ``[0, d]``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if t <= 0 or d < 1:
        raise ValueError("t must be positive and d >= 1")
    return math.ceil(math.log(2.0 / eps) * d * d / (2.0 * t * t))


def a_eta(eta: float, halved: bool = False) -> float:
    """Phase-transition width constant ``sqrt(8 log(4/eta))``.

    ``halved=True`` gives the constant at ``eta/2``, ``sqrt(8 log(8/eta))``,
    used when the statistical dimension itself is random.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    return math.sqrt(8.0 * math.log((8.0 if halved else 4.0) / eta))
