"""Weighted basis pursuit with Gaussian measurements.

``min sum_i w_i |x_i|  s.t.  A x = y`` is solved as a linear program after
splitting ``x = u - v`` with ``u, v >= 0``; for positive weights this has
the same optimal ``x`` as the bounded-slack form ``-t <= x <= t``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._rng import run_chunks, substream
from .distributions import sample_masks
from .lp import LPError, solve_standard_lp

log = logging.getLogger(__name__)

SUCCESS_TOL = 1e-5
LP_TOL = 1e-8


@dataclass
class MeasurementEnsemble:
    A: np.ndarray
    seed: int

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]


def sample_gaussian_matrix(m: int, d: int, seed: int) -> MeasurementEnsemble:
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    rng = substream(seed, "matrix", m, d)
    return MeasurementEnsemble(rng.standard_normal((m, d)), seed)


@dataclass
class RecoveryOutcome:
    x_hat: np.ndarray
    objective: float
    residuals: dict
    iterations: int
    success: bool | None = None
    rel_err: float | None = None


def solve_weighted_bp(A, y, w, tol: float = LP_TOL, max_iter: int = 200) -> RecoveryOutcome:
    """Minimise the weighted l1 norm subject to ``A x = y``.

    Raises :class:`~weightedcs.lp.LPError` with status ``"infeasible"``
    when ``y`` is not in the range of ``A`` and ``"max_iterations"`` (with
    the last residuals) when the interior-point method stalls.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    m, d = A.shape
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    if w.shape != (d,) or y.shape != (m,):
        raise ValueError("shape mismatch between A, y and w")
    # range check: least-squares residual of A x = y
    x_ls, *_ = np.linalg.lstsq(A, y, rcond=None)
    if np.linalg.norm(A @ x_ls - y) > 1e-8 * (1.0 + np.linalg.norm(y)):
        raise LPError("infeasible", "y is not in the column space of A")

    B = np.hstack([A, -A])
    c = np.concatenate([w, w])

    def normal_matrix(dvec):
        return (A * (dvec[:d] + dvec[d:])) @ A.T

    res = solve_standard_lp(B, y, c, tol=tol, max_iter=max_iter, normal_matrix=normal_matrix)
    x_hat = res.x[:d] - res.x[d:]
    return RecoveryOutcome(x_hat=x_hat, objective=res.objective, residuals=res.residuals, iterations=res.iterations)


def relative_error(x_hat, x0) -> float:
    x0 = np.asarray(x0, dtype=float)
    return float(np.linalg.norm(np.asarray(x_hat) - x0) / max(1.0, np.linalg.norm(x0)))


def is_success(x_hat, x0, tol: float = SUCCESS_TOL) -> bool:
    """Perfect recovery up to ``|x_hat - x0| / max(1, |x0|) <= tol`` (inclusive)."""
    x_hat = np.asarray(x_hat)
    if x_hat.shape != np.shape(x0):
        raise ValueError("x_hat and x0 must have the same length")
    return relative_error(x_hat, x0) <= tol


def sample_signal(dist, rng, magnitudes: str = "gaussian") -> np.ndarray:
    """Signal with a random support; ``gaussian`` entries are N(0,1), ``ones`` are 1."""
    mask = sample_masks(dist, rng, 1)[0]
    x0 = np.zeros(mask.shape[0])
    if magnitudes == "gaussian":
        x0[mask] = rng.standard_normal(int(mask.sum()))
    elif magnitudes == "ones":
        x0[mask] = 1.0
    else:
        raise ValueError(f"unknown magnitude model {magnitudes!r}")
    return x0


@dataclass
class PhasePoint:
    m: int
    trials: int
    successes: int
    solver_failures: int

    @property
    def frequency(self) -> float:
        return self.successes / self.trials


def _trial(dist, w, m, seed, trial, magnitudes, success_tol, lp_tol):
    rng = substream(seed, "trial", m, trial)
    x0 = sample_signal(dist, rng, magnitudes)
    A = rng.standard_normal((m, x0.shape[0]))
    try:
        out = solve_weighted_bp(A, A @ x0, w, tol=lp_tol)
    except LPError as exc:
        log.warning("m=%d trial %d: solver failed (%s); counted as failure", m, trial, exc)
        return False, True
    return is_success(out.x_hat, x0, success_tol), False


def _phase_chunk(dist, w, m, seed, trials, magnitudes, success_tol, lp_tol):
    hits = fails = 0
    for trial in trials:
        ok, failed = _trial(dist, w, m, seed, trial, magnitudes, success_tol, lp_tol)
        hits += ok
        fails += failed
    return hits, fails


def phase_transition_curve(dist, w, m_grid, trials: int = 100, seed: int = 0, magnitudes: str = "gaussian",
                           success_tol: float = SUCCESS_TOL, lp_tol: float = LP_TOL, workers: int = 1) -> list[PhasePoint]:
    """Empirical recovery frequency for each number of measurements.

    Trial ``i`` at ``m`` measurements draws its signal and matrix from the
    substream ``(seed, m, i)``, so curves for different weights share their
    instances.
    """
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    m_grid = [int(m) for m in m_grid]
    if any(not 1 <= m <= d for m in m_grid):
        raise ValueError(f"measurement counts must lie in 1..{d}")
    block = 25
    tasks = []
    for m in m_grid:
        for lo in range(0, trials, block):
            tasks.append((dist, w, m, seed, range(lo, min(lo + block, trials)), magnitudes, success_tol, lp_tol))
    parts = run_chunks(_phase_chunk, tasks, workers)
    out = []
    for m in m_grid:
        hits = fails = 0
        for task, (h, f) in zip(tasks, parts):
            if task[2] == m:
                hits += h
                fails += f
        out.append(PhasePoint(m, trials, hits, fails))
    return out
