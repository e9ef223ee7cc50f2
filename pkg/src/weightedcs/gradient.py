"""Stochastic steepest descent on the expected statistical dimension.

For a fixed support ``I`` and a fixed canonical Gaussian point ``z``, the
squared norm of the projection onto ``D(I, w)`` is, locally in ``w``,

    |z|^2 - |P_{L^perp} z|^2 + F(w),
    F(w) = sum_{i<=m} z_{j_i}^2 - N^2 / D,
    N = sum_I w_i z_i + sum_{i<=m} w_{j_i}|z_{j_i}|,
    D = sum_I w_i^2 + sum_{i<=m} w_{j_i}^2,

with the active set (the ``m`` largest ``|z_j|/w_j``) held fixed.  With
``t = N / D`` the gradient is ``2 t (t w_s - z_s)`` on the support,
``2 t (t w_s - |z_s|)`` on the active complement coordinates and zero
elsewhere.  Points in the interior of the cone have zero gradient.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import chunk_sizes, run_chunks, substream
from .cone import projection_batch
from .distributions import sample_masks
from .estimators import delta_samples

log = logging.getLogger(__name__)

STRICT_TOL = 1e-12
POSITIVITY_FLOOR = 1e-8


@dataclass
class GradientSample:
    grad: np.ndarray
    valid: bool


def gradient_batch(masks: np.ndarray, w, z: np.ndarray):
    """Gradients of the squared projection norm for many (support, point) pairs.

    Returns ``(grads, valid)``.  A row is invalid when a sort comparison or
    a bracketing threshold is met with equality (to ``1e-12`` relative),
    i.e. where the squared norm is not differentiable.  Rows with empty or
    full supports get zero gradient: those cones do not depend on ``w``.
    """
    w = np.asarray(w, dtype=float)
    n, d = masks.shape
    k = masks.sum(axis=1)
    grads = np.zeros((n, d))
    valid = np.ones(n, dtype=bool)
    mid = (k > 0) & (k < d)
    if not np.any(mid):
        return grads, valid

    mk = masks[mid]
    zm = z[mid]
    wI = np.where(mk, w, 0.0)
    a = np.sqrt(np.sum(wI * wI, axis=1))
    P = np.sum(wI * zm, axis=1)
    z0 = -P / a
    absz = np.abs(zm)
    res = projection_batch(a, z0, absz, np.broadcast_to(w, zm.shape), valid=~mk)
    m, nJ, order, b, t = res["m"], res["nJ"], res["order"], res["b"], res["t"]
    rows = np.arange(mk.shape[0])

    # strictness of the sort among complement coordinates
    ratio = np.where(~mk, absz / w, -1.0)
    r = np.take_along_axis(ratio, order, axis=1)
    gaps = r[:, :-1] - r[:, 1:]
    in_J = np.arange(d - 1)[None, :] < (nJ - 1)[:, None]
    tie = np.any(in_J & (gaps <= STRICT_TOL * np.maximum(1.0, r[:, :-1])), axis=1)

    # strictness of the bracketing b_{m-1} < a z0 < b_m
    az0 = a * z0
    scale = np.maximum(1.0, np.abs(b).max(axis=1))
    hi_idx = np.minimum(m, nJ)
    lo_idx = np.maximum(m - 1, 0)
    near_hi = np.abs(b[rows, hi_idx] - az0) <= STRICT_TOL * scale
    near_lo = (m > 0) & (np.abs(b[rows, lo_idx] - az0) <= STRICT_TOL * scale)
    ok = ~(tie | near_hi | near_lo)

    interior = m > nJ
    t0 = np.where(interior, 0.0, t)[:, None]
    g = np.where(mk, 2.0 * t0 * (t0 * w - zm), 0.0)
    active_sorted = np.arange(d)[None, :] < np.where(interior, 0, m)[:, None]
    active = np.zeros_like(mk)
    np.put_along_axis(active, order, active_sorted, axis=1)
    g += np.where(active, 2.0 * t0 * (t0 * w - absz), 0.0)

    grads[mid] = g
    valid[mid] = ok
    return grads, valid


def gradient_sample(support, w, z) -> GradientSample:
    """Gradient of ``|pi_{D(I,w)}(z)|^2`` with respect to ``w`` at a fixed canonical ``z``."""
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    d = w.shape[0]
    mask = np.zeros(d, dtype=bool)
    mask[np.asarray(support, dtype=int)] = True
    if not 1 <= mask.sum() <= d - 1:
        raise ValueError("gradient samples need 1 <= |I| <= d-1")
    grads, valid = gradient_batch(mask[None, :], w, z[None, :])
    return GradientSample(grad=grads[0], valid=bool(valid[0]))


def squared_projection_norm(support, w, z) -> float:
    """``|pi_{D(I,w)}(z)|^2`` for a canonical vector, including the lineality part."""
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    mask = np.zeros(w.shape[0], dtype=bool)
    mask[np.asarray(support, dtype=int)] = True
    a = math.sqrt(float(np.sum(w[mask] ** 2)))
    z0 = -float(np.dot(w[mask], z[mask])) / a
    res = projection_batch([a], [z0], np.abs(z[~mask])[None, :], w[~mask][None, :])
    lineality = float(np.dot(z[mask], z[mask])) - z0 * z0
    return float(res["sq_perp"][0]) + lineality


@dataclass
class GradientEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    n: int
    redraws: int


def _grad_chunk(dist, w, seed, chunk, size):
    rng = substream(seed, chunk)
    masks = sample_masks(dist, rng, size)
    z = rng.standard_normal(masks.shape)
    grads, valid = gradient_batch(masks, w, z)
    redraws = 0
    while not np.all(valid):
        bad = np.flatnonzero(~valid)
        redraws += bad.size
        masks[bad] = sample_masks(dist, rng, bad.size)
        z[bad] = rng.standard_normal((bad.size, masks.shape[1]))
        grads[bad], valid[bad] = gradient_batch(masks[bad], w, z[bad])
    return grads.sum(axis=0), (grads * grads).sum(axis=0), redraws


def estimate_gradient(dist, w, n: int, seed: int = 0, workers: int = 1) -> GradientEstimate:
    """Monte Carlo gradient of the expected statistical dimension.

    Non-differentiable (tie) samples are redrawn with fresh randomness.
    """
    if n < 1:
        raise ValueError("n must be positive")
    w = np.asarray(w, dtype=float)
    tasks = [(dist, w, seed, i, s) for i, s in enumerate(chunk_sizes(n))]
    parts = run_chunks(_grad_chunk, tasks, workers)
    s = np.sum([p[0] for p in parts], axis=0)
    ss = np.sum([p[1] for p in parts], axis=0)
    redraws = int(sum(p[2] for p in parts))
    mean = s / n
    var = np.maximum(ss / n - mean * mean, 0.0) * (n / (n - 1) if n > 1 else 0.0)
    return GradientEstimate(mean=mean, stderr=np.sqrt(var / n), n=n, redraws=redraws)


@dataclass
class DescentConfig:
    n_grad_samples: int = 20000
    n_eval_samples: int = 20000
    initial_step: float = 1.0
    max_iters: int = 20
    min_step: float = 1e-3
    seed: int = 0
    common_random_numbers: bool = True
    workers: int = 1

    def __post_init__(self):
        if min(self.n_grad_samples, self.n_eval_samples, self.max_iters) < 1:
            raise ValueError("sample counts and max_iters must be positive")
        if not 0 < self.min_step < self.initial_step:
            raise ValueError("need 0 < min_step < initial_step")


@dataclass
class DescentStep:
    iteration: int
    w: np.ndarray
    step: float
    delta: float
    stderr: float
    accepted: bool


@dataclass
class DescentResult:
    steps: list = field(default_factory=list)
    reason: str = ""

    @property
    def w(self) -> np.ndarray:
        return self.steps[-1].w

    @property
    def accepted(self) -> int:
        """Number of accepted steps (the starting point is not counted)."""
        return len(self.steps) - 1


def _sub_seed(seed, *keys) -> int:
    return int(substream(seed, *keys).integers(0, 2**63))


def _stderr(samples) -> float:
    n = samples.shape[0]
    return float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def descend(dist, w0, cfg: DescentConfig | None = None) -> DescentResult:
    """Backtracking steepest descent on the expected statistical dimension.

    Each iteration estimates the gradient, starts from the largest step
    ``<= initial_step`` keeping every weight above ``1e-8``, and halves it
    until the candidate's estimate improves on the current one by more than
    one standard error, stopping once the step falls below ``min_step``.

    The threshold is the standard error of the current estimate itself, so
    improvements below the Monte Carlo resolution are not chased.  With
    common random numbers (the default) every evaluation in the run reuses
    one set of samples, independent of the gradient samples, and the
    recorded estimates decrease strictly along accepted steps.  Otherwise
    each evaluation draws fresh samples.
    """
    cfg = cfg or DescentConfig()
    w = np.asarray(w0, dtype=float).copy()
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("initial weights must be finite and strictly positive")
    eval_seed = _sub_seed(cfg.seed, "eval")

    def evaluate(weights, it, attempt):
        s = eval_seed if cfg.common_random_numbers else _sub_seed(cfg.seed, "eval", it, attempt)
        return delta_samples(dist, weights, cfg.n_eval_samples, s, mode="norm")

    cur = evaluate(w, 0, 0)
    result = DescentResult()
    result.steps.append(DescentStep(0, w.copy(), 0.0, float(cur.mean()), _stderr(cur), True))

    for it in range(1, cfg.max_iters + 1):
        grad = estimate_gradient(dist, w, cfg.n_grad_samples, _sub_seed(cfg.seed, "grad", it), cfg.workers).mean
        if not np.any(grad):
            result.reason = "zero gradient"
            return result
        pos = grad > 0
        step = cfg.initial_step
        if np.any(pos):
            step = min(step, float(np.min((w[pos] - POSITIVITY_FLOOR) / grad[pos])))
        accepted = False
        attempt = 0
        while step >= cfg.min_step:
            cand_w = np.maximum(w - step * grad, POSITIVITY_FLOOR)
            cand = evaluate(cand_w, it, attempt)
            improve = cand.mean() < cur.mean() - _stderr(cur)
            log.debug("iter %d step %.4g: %.5f -> %.5f", it, step, cur.mean(), cand.mean())
            if improve:
                accepted = True
                break
            step /= 2.0
            attempt += 1
        if not accepted:
            result.reason = "step below min_step"
            return result
        w, cur = cand_w, cand
        result.steps.append(DescentStep(it, w.copy(), step, float(cur.mean()), _stderr(cur), True))
    result.reason = "max_iters reached"
    return result
