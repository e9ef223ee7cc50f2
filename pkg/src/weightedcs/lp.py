"""Dense primal-dual interior-point solver for standard-form linear programs.

    minimize c^T x  subject to  B x = b,  x >= 0

Mehrotra predictor-corrector with separate primal and dual step lengths.
Search directions come from the normal equations ``B diag(x/s) B^T``,
factored by Cholesky (least squares as a fallback near the end, where the
scaling matrix becomes badly conditioned).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


DIVERGENCE = 1e12


class LPError(RuntimeError):
    """The solver stopped without an optimal point; see ``status`` and ``residuals``."""

    def __init__(self, status: str, message: str, residuals=None):
        self.status = status
        self.residuals = residuals or {}
        super().__init__(f"{status}: {message}")


@dataclass
class LPResult:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    iterations: int
    residuals: dict


def _residuals(B, b, c, x, y, s):
    rp = b - B @ x
    rd = c - B.T @ y - s
    pobj = float(c @ x)
    dobj = float(b @ y)
    return rp, rd, {
        "equality": float(np.linalg.norm(rp) / (1.0 + np.linalg.norm(b))),
        "stationarity": float(np.linalg.norm(rd) / (1.0 + np.linalg.norm(c))),
        "complementarity": float(abs(pobj - dobj) / (1.0 + abs(pobj))),
    }


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def solve_standard_lp(B, b, c, tol: float = 1e-8, max_iter: int = 200, normal_matrix=None) -> LPResult:
    """Solve ``min c.x  s.t.  Bx = b, x >= 0``.

    ``normal_matrix(dvec)`` may be supplied to form ``B diag(dvec) B^T``
    cheaply when ``B`` has structure.
    """
    B = np.asarray(B, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = B.shape
    if normal_matrix is None:
        def normal_matrix(dvec):
            return (B * dvec) @ B.T

    def solve_normal(M, rhs):
        try:
            return sla.cho_solve(sla.cho_factor(M, check_finite=False), rhs, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            return sla.lstsq(M, rhs, check_finite=False)[0]

    # Mehrotra's starting point
    M0 = normal_matrix(np.ones(n))
    x = B.T @ solve_normal(M0, b)
    y = solve_normal(M0, B @ c)
    s = c - B.T @ y
    dx = max(-1.5 * x.min(), 0.0)
    ds = max(-1.5 * s.min(), 0.0)
    x = x + dx
    s = s + ds
    xs = float(x @ s)
    x = x + 0.5 * xs / max(s.sum(), 1e-300)
    s = s + 0.5 * xs / max(x.sum(), 1e-300)
    x = np.maximum(x, 1e-8)
    s = np.maximum(s, 1e-8)

    for it in range(max_iter):
        rp, rd, res = _residuals(B, b, c, x, y, s)
        if max(res.values()) <= tol:
            return LPResult(x, y, s, float(c @ x), it, res)
        mu = float(x @ s) / n
        dvec = x / s
        M = normal_matrix(dvec)
        try:
            factor = sla.cho_factor(M, check_finite=False)
            solve = lambda rhs: sla.cho_solve(factor, rhs, check_finite=False)  # noqa: E731
        except (np.linalg.LinAlgError, sla.LinAlgError):
            solve = lambda rhs: sla.lstsq(M, rhs, check_finite=False)[0]  # noqa: E731

        def direction(rc):
            dy = solve(rp + B @ (dvec * rd - rc / s))
            ds_ = rd - B.T @ dy
            dx_ = (rc - x * ds_) / s
            return dx_, dy, ds_

        # predictor
        dx_a, dy_a, ds_a = direction(-x * s)
        ap = _max_step(x, dx_a)
        ad = _max_step(s, ds_a)
        mu_aff = float((x + ap * dx_a) @ (s + ad * ds_a)) / n
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dx_, dy, ds_ = direction(sigma * mu - x * s - dx_a * ds_a)
        eta = max(0.9, 1.0 - mu)
        ap = min(1.0, eta * _max_step(x, dx_))
        ad = min(1.0, eta * _max_step(s, ds_))
        x = x + ap * dx_
        y = y + ad * dy
        s = s + ad * ds_
        # divergence: primal rays signal unboundedness, dual rays infeasibility
        if np.linalg.norm(x) > DIVERGENCE * (1.0 + np.linalg.norm(b)):
            raise LPError("unbounded", "primal iterates diverge", res)
        if np.linalg.norm(y) > DIVERGENCE * (1.0 + np.linalg.norm(c)):
            raise LPError("infeasible", "dual iterates diverge", res)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
            raise LPError("numerical", "iterates became non-finite", res)
        x = np.maximum(x, 1e-300)
        s = np.maximum(s, 1e-300)

    _, _, res = _residuals(B, b, c, x, y, s)
    raise LPError("max_iterations", f"no convergence in {max_iter} iterations", res)
