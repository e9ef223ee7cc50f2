"""Weight design from marginal support probabilities.

The designed weight of coordinate ``i`` is the root ``lam`` of

    lam * beta_i / (1 - beta_i) = sqrt(2/pi) * J1(lam)

which is the per-coordinate stationarity condition of the averaged
statistical-dimension bound evaluated by :func:`expected_delta_upper_bound`.
"""

from __future__ import annotations

import logging

import numpy as np

from .tails import SQRT_2_OVER_PI, moment_j1, moment_j2

log = logging.getLogger(__name__)

BETA_CLIP = 1e-6


def clip_beta(beta, eps: float = BETA_CLIP) -> np.ndarray:
    """Clip marginals into ``[eps, 1 - eps]``, warning when anything moves."""
    beta = np.asarray(beta, dtype=float)
    clipped = np.clip(beta, eps, 1.0 - eps)
    if np.any(clipped != beta):
        n = int(np.sum(clipped != beta))
        log.warning("clipped %d support probabilities into [%g, 1 - %g]", n, eps, eps)
    return clipped


def check_beta(beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.size == 0:
        raise ValueError("beta must be a non-empty 1-D vector")
    if np.any(~(beta > 0)) or np.any(~(beta < 1)):
        raise ValueError("support probabilities must lie strictly inside (0, 1)")
    return beta


def lambda_residual(lam: float, beta: float) -> float:
    return lam * beta / (1.0 - beta) - SQRT_2_OVER_PI * moment_j1(lam)


def solve_lambda(beta: float, tol: float = 1e-10) -> float:
    """Root of the weight equation by bisection.

    The left side increases from 0 and the right side decreases from
    ``sqrt(2/pi)``, so the root is unique.  The upper bracket doubles from
    1 until the residual turns positive.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = 0.0, 1.0
    while lambda_residual(hi, beta) < 0:
        lo, hi = hi, 2.0 * hi
    mid = 0.5 * (lo + hi)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        r = lambda_residual(mid, beta)
        if abs(r) <= tol or mid in (lo, hi):
            break
        if r < 0:
            lo = mid
        else:
            hi = mid
    return mid


def weights_from_beta(beta, tol: float = 1e-10) -> np.ndarray:
    """Designed weights, with the free global scale fixed to 1."""
    beta = clip_beta(beta)
    check_beta(beta)
    cache: dict[float, float] = {}
    out = np.empty_like(beta)
    for i, b in enumerate(beta):
        if b not in cache:
            cache[b] = solve_lambda(float(b), tol)
        out[i] = cache[b]
    return out


def _bisect_increasing(fn, tol_rel: float = 1e-12) -> float:
    """Zero of an increasing function on ``[0, inf)`` with ``fn(0) < 0``."""
    lo, hi = 0.0, 1.0
    while fn(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            return np.inf
    while hi - lo > tol_rel * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if fn(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def delta_bound_value(support, w, tau: float) -> float:
    """``|I| + tau^2 sum_I w_i^2 + sum_{j not in I} sqrt(2/pi) J2(tau w_j)``."""
    w = np.asarray(w, dtype=float)
    mask = np.zeros(w.shape[0], dtype=bool)
    mask[np.asarray(support, dtype=int)] = True
    k = int(mask.sum())
    if np.isinf(tau):
        return float(k) if k == 0 else np.inf
    return float(k + tau**2 * np.sum(w[mask] ** 2) + SQRT_2_OVER_PI * np.sum(moment_j2(tau * w[~mask])))


def delta_bound_support(support, w) -> tuple[float, float]:
    """Minimise the per-support bound over ``tau >= 0``.

    Returns ``(bound, tau)``.  The objective is strictly convex in ``tau``;
    its derivative is bisected.  An empty support has no finite minimiser:
    the bound decreases to 0 as ``tau -> inf`` and ``(0.0, inf)`` is
    returned.  A full support is minimised at ``tau = 0`` with bound ``d``.
    """
    w = np.asarray(w, dtype=float)
    mask = np.zeros(w.shape[0], dtype=bool)
    mask[np.asarray(support, dtype=int)] = True
    a2 = float(np.sum(w[mask] ** 2))
    wJ = w[~mask]
    if mask.sum() == 0:
        return 0.0, np.inf
    if wJ.size == 0:
        return float(w.shape[0]), 0.0

    def deriv(tau):
        return 2.0 * tau * a2 - 2.0 * SQRT_2_OVER_PI * np.sum(wJ * moment_j1(tau * wJ))

    tau = _bisect_increasing(deriv, 1e-12)
    return delta_bound_value(support, w, tau), tau


def expected_delta_upper_bound(beta, w, tau: float) -> float:
    """Support-averaged bound on the expected statistical dimension at ``tau``."""
    beta = np.asarray(beta, dtype=float)
    lam = tau * np.asarray(w, dtype=float)
    return float(np.sum(beta) + np.sum(beta * lam**2 + (1.0 - beta) * SQRT_2_OVER_PI * moment_j2(lam)))


def expected_bound_dtau(beta, w, tau: float) -> float:
    """Derivative of :func:`expected_delta_upper_bound` with respect to ``tau``."""
    beta = np.asarray(beta, dtype=float)
    w = np.asarray(w, dtype=float)
    lam = tau * w
    return float(np.sum(2.0 * w * (beta * lam - (1.0 - beta) * SQRT_2_OVER_PI * moment_j1(lam))))


def minimize_expected_bound(beta, w) -> tuple[float, float]:
    """Minimise :func:`expected_delta_upper_bound` over ``tau``; returns ``(bound, tau)``."""
    tau = _bisect_increasing(lambda s: expected_bound_dtau(beta, w, s), 1e-12)
    return expected_delta_upper_bound(beta, w, tau), tau
