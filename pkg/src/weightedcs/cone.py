"""Closed-form Euclidean projection onto descent cones of weighted l1 norms.

The descent cone ``D(I, w)`` of ``x -> sum_i w_i |x_i|`` at a point with
support ``I`` splits orthogonally into a (k-1)-dimensional lineality space
``L`` and a cone over a weighted crosspolytope living in ``L^perp``.  In the
orthonormal basis ``e0' = -(1/a) sum_{i in I} w_i e_i``, ``{e_j : j in J}``
of ``L^perp`` the projection is available in closed form after a single
sort, which is what this module implements.

Indices are zero-based throughout.  The cone of a signal with support ``I``
is taken at a point whose entries on ``I`` are positive; by sign symmetry
every sign pattern gives an isometric cone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConeSpec",
    "ConeCoordinates",
    "ProjectionWitness",
    "WitnessReport",
    "make_cone",
    "lineality_basis",
    "to_cone_coordinates",
    "from_cone_coordinates",
    "project",
    "project_point",
    "verify_witness",
    "face_dimension_batch",
    "projection_batch",
]


@dataclass(frozen=True)
class ConeSpec:
    """Descent cone ``D(I, w)`` with ``1 <= |I| <= d - 1``."""

    w: np.ndarray
    support: np.ndarray
    complement: np.ndarray = field(init=False, repr=False)
    a: float = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        d = w.shape[0]
        support = np.unique(np.asarray(self.support, dtype=int))
        if w.ndim != 1 or d < 1:
            raise ValueError("weights must be a non-empty 1-D vector")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and strictly positive")
        if support.size and (support[0] < 0 or support[-1] >= d):
            raise ValueError(f"support indices out of range for d={d}")
        if support.size == 0 or support.size == d:
            raise ValueError(
                f"support size must satisfy 1 <= k <= d-1 (got k={support.size}, d={d})"
            )
        mask = np.ones(d, dtype=bool)
        mask[support] = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "complement", np.flatnonzero(mask))
        object.__setattr__(self, "a", float(np.sqrt(np.sum(w[support] ** 2))))

    @property
    def d(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.support.shape[0]


def make_cone(w, support) -> ConeSpec:
    return ConeSpec(np.asarray(w, dtype=float), np.asarray(support, dtype=int))


@dataclass
class ConeCoordinates:
    """Coefficients of a vector in the orthonormal basis adapted to a cone.

    ``z0`` is the coefficient along ``e0'``, ``zJ`` the canonical entries
    on the complement of the support (in ascending index order) and ``gL``
    the coefficients along :func:`lineality_basis`; ``gL`` may be ``None``
    when only face dimensions are needed.
    """

    z0: float
    zJ: np.ndarray
    gL: np.ndarray | None = None

    def norm(self) -> float:
        sq = self.z0**2 + float(np.dot(self.zJ, self.zJ))
        if self.gL is not None:
            sq += float(np.dot(self.gL, self.gL))
        return float(np.sqrt(sq))


@dataclass
class ProjectionWitness:
    """Everything the closed-form projection computes for one input.

    ``m`` is the number of active crosspolytope generators; ``m == d-k+1``
    flags the interior case where the input already lies in the cone.
    ``ordering`` lists the complement indices sorted by ``|z_j| / w_j``
    (descending, ties by ascending index).  ``thresholds`` holds
    ``b_0, ..., b_{d-k}``.
    """

    m: int
    face_dim: int
    t: float
    alphas: np.ndarray
    sq_norm: float
    ordering: np.ndarray
    thresholds: np.ndarray
    pi: np.ndarray | None = None

    @property
    def interior(self) -> bool:
        return self.m == self.ordering.shape[0] + 1


@dataclass
class WitnessReport:
    ok: bool
    residuals: dict
    failed: list

    def __bool__(self) -> bool:
        return self.ok


def lineality_basis(cone: ConeSpec) -> np.ndarray:
    """Orthonormal basis (columns) of ``L = {x : sum_I w_i x_i = 0, x_J = 0}``.

    Modified Gram-Schmidt on ``w_{i2} e_{i1} - w_{i1} e_{i2}`` for
    consecutive support indices, in index order, so the basis (and hence
    every witness) is reproducible.
    """
    d, idx, w = cone.d, cone.support, cone.w
    basis = np.zeros((d, cone.k - 1))
    for r in range(cone.k - 1):
        v = np.zeros(d)
        i1, i2 = idx[r], idx[r + 1]
        v[i1] = w[i2]
        v[i2] = -w[i1]
        for s in range(r):
            v -= np.dot(basis[:, s], v) * basis[:, s]
        basis[:, r] = v / np.linalg.norm(v)
    return basis


def _e0_prime(cone: ConeSpec) -> np.ndarray:
    e0 = np.zeros(cone.d)
    e0[cone.support] = -cone.w[cone.support] / cone.a
    return e0


def to_cone_coordinates(cone: ConeSpec, z, with_lineality: bool = True) -> ConeCoordinates:
    z = np.asarray(z, dtype=float)
    if z.shape != (cone.d,):
        raise ValueError(f"expected a vector of length {cone.d}, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    z0 = -float(np.dot(cone.w[cone.support], z[cone.support])) / cone.a
    gL = lineality_basis(cone).T @ z if with_lineality else None
    return ConeCoordinates(z0=z0, zJ=z[cone.complement].copy(), gL=gL)


def from_cone_coordinates(cone: ConeSpec, coords: ConeCoordinates) -> np.ndarray:
    if coords.gL is None:
        raise ValueError("lineality coefficients are required to rebuild z")
    z = coords.z0 * _e0_prime(cone)
    z[cone.complement] += coords.zJ
    z += lineality_basis(cone) @ coords.gL
    return z


def projection_batch(a, z0, absz, wts, valid=None):
    """Vectorised core of the closed-form projection onto ``L^perp`` cones.

    Each row is one cone over a weighted crosspolytope: ``a`` (n,) is the
    apex scale, ``z0`` (n,) the ``e0'`` coefficient, ``absz`` and ``wts``
    (n, p) the absolute complement coordinates and their weights.  Rows
    with fewer than ``p`` complement coordinates are padded and flagged
    through ``valid``.

    Returns a dict with ``m`` (active generator count; ``nJ + 1`` marks the
    interior case), ``t`` (nan in the interior case), ``sq_perp`` (squared
    norm of the projection of the ``L^perp`` part), ``order`` (column
    permutation sorting ``absz / wts`` descending), ``b`` (thresholds
    ``b_0..b_p``, constant past ``nJ``) and ``nJ``.
    """
    a = np.asarray(a, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    absz = np.asarray(absz, dtype=float)
    wts = np.asarray(wts, dtype=float)
    n, p = absz.shape
    if valid is None:
        valid = np.ones((n, p), dtype=bool)
    nJ = valid.sum(axis=1)

    ratio = np.where(valid, absz / wts, -1.0)
    order = np.argsort(-ratio, axis=1, kind="stable")
    r = np.take_along_axis(ratio, order, axis=1)
    zs = np.take_along_axis(np.where(valid, absz, 0.0), order, axis=1)
    ws = np.take_along_axis(np.where(valid, wts, 0.0), order, axis=1)
    r = np.maximum(r, 0.0)

    S1 = np.zeros((n, p + 1))
    S2 = np.zeros((n, p + 1))
    np.cumsum(ws * zs, axis=1, out=S1[:, 1:])
    np.cumsum(ws * ws, axis=1, out=S2[:, 1:])
    r_next = np.zeros((n, p + 1))
    r_next[:, :p] = r
    a2 = (a * a)[:, None]
    b = S1 - (a2 + S2) * r_next

    az0 = a * z0
    count = np.sum(b < az0[:, None], axis=1)
    m = np.minimum(count, nJ + 1)
    interior = m > nJ

    mc = np.minimum(m, p)
    S1m = np.take_along_axis(S1, mc[:, None], axis=1)[:, 0]
    S2m = np.take_along_axis(S2, mc[:, None], axis=1)[:, 0]
    t = (-az0 + S1m) / (a * a + S2m)
    t = np.where(interior, np.nan, t)

    active = np.arange(p)[None, :] < m[:, None]
    t_safe = np.where(interior, 0.0, t)
    resid = np.where(active, zs - ws * t_safe[:, None], 0.0)
    sq_perp = (z0 + a * t_safe) ** 2 + np.sum(resid * resid, axis=1)
    full = z0 * z0 + np.sum(np.where(valid, absz * absz, 0.0), axis=1)
    sq_perp = np.where(interior, full, sq_perp)
    return {"m": m, "t": t, "sq_perp": sq_perp, "order": order, "b": b, "nJ": nJ}


def face_dimension_batch(a, z0, absz, wts, k, valid=None) -> np.ndarray:
    """Face dimensions ``m + k - 1`` (``d`` in the interior case) for many rows."""
    res = projection_batch(a, z0, absz, wts, valid)
    k = np.asarray(k)
    d = res["nJ"] + k
    return np.where(res["m"] > res["nJ"], d, res["m"] + k - 1)


def project(cone: ConeSpec, coords: ConeCoordinates) -> ProjectionWitness:
    zJ = np.asarray(coords.zJ, dtype=float)
    nJ = cone.d - cone.k
    if zJ.shape != (nJ,):
        raise ValueError(f"zJ must have length d-k={nJ}")
    wJ = cone.w[cone.complement]
    res = projection_batch(
        np.array([cone.a]), np.array([coords.z0]), np.abs(zJ)[None, :], wJ[None, :]
    )
    m = int(res["m"][0])
    order = res["order"][0]
    ordering = cone.complement[order]
    b = res["b"][0]
    interior = m == nJ + 1
    lineality_sq = 0.0 if coords.gL is None else float(np.dot(coords.gL, coords.gL))
    sq_norm = float(res["sq_perp"][0]) + lineality_sq

    if interior:
        t = float("nan")
        alphas = np.zeros(0)
        face_dim = cone.d
    else:
        t = float(res["t"][0])
        ws = wJ[order[:m]]
        alphas = ws * np.abs(zJ[order[:m]]) - ws * ws * t
        face_dim = m + cone.k - 1

    pi = None
    if coords.gL is not None:
        if interior:
            pi = from_cone_coordinates(cone, coords)
        else:
            pi = _assemble_pi(cone, coords, ordering, alphas)
    return ProjectionWitness(
        m=m,
        face_dim=face_dim,
        t=t,
        alphas=alphas,
        sq_norm=sq_norm,
        ordering=ordering,
        thresholds=b.copy(),
        pi=pi,
    )


def _assemble_pi(cone, coords, ordering, alphas):
    """``sum_i alpha_i u_i + sum_l g_l q_l`` in canonical coordinates."""
    pos = np.searchsorted(cone.complement, ordering[: alphas.shape[0]])
    signs = np.sign(coords.zJ[pos])
    pi = (np.sum(alphas) / cone.a) * _e0_prime(cone)
    pi[ordering[: alphas.shape[0]]] += alphas * signs / cone.w[ordering[: alphas.shape[0]]]
    if coords.gL is not None and coords.gL.size:
        pi += lineality_basis(cone) @ coords.gL
    return pi


def project_point(cone: ConeSpec, z) -> ProjectionWitness:
    """Project a canonical vector; convenience wrapper with the lineality part."""
    return project(cone, to_cone_coordinates(cone, z))


def _generators(cone: ConeSpec) -> np.ndarray:
    """Unit-norm rows generating the cone: ``+-e_j/w_j - y`` and ``+-q_l``."""
    y = np.zeros(cone.d)
    y[cone.support] = 1.0 / (cone.k * cone.w[cone.support])
    rows = []
    for j in cone.complement:
        for s in (1.0, -1.0):
            g = -y.copy()
            g[j] += s / cone.w[j]
            rows.append(g)
    Q = lineality_basis(cone)
    rows.extend(Q.T)
    rows.extend(-Q.T)
    G = np.array(rows)
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def verify_witness(cone: ConeSpec, z, witness: ProjectionWitness, tol: float = 1e-10) -> WitnessReport:
    """Check the optimality conditions of a projection witness.

    The projected point is rebuilt from the witness multipliers (not taken
    from ``witness.pi``), so a tampered witness is caught.  Residuals are
    absolute, scaled by ``max(1, |z|)`` resp. ``max(1, |z|^2)``.
    """
    z = np.asarray(z, dtype=float)
    coords = to_cone_coordinates(cone, z)
    if witness.interior:
        pi = z.copy()
    else:
        pi = _assemble_pi(cone, coords, witness.ordering, np.asarray(witness.alphas))
    r = z - pi
    scale = max(1.0, float(np.linalg.norm(z)))

    w = cone.w
    membership = float(np.dot(w[cone.support], pi[cone.support]) + np.sum(w[cone.complement] * np.abs(pi[cone.complement])))
    min_alpha = float(np.min(witness.alphas)) if len(witness.alphas) else 0.0
    primal = max(0.0, membership / np.linalg.norm(w), -min_alpha)
    dual = max(0.0, float(np.max(_generators(cone) @ r)))
    comp = abs(float(np.dot(pi, r)))
    residuals = {"primal": primal, "dual": dual, "complementarity": comp}
    if witness.pi is not None:
        residuals["pi_mismatch"] = float(np.linalg.norm(witness.pi - pi))
    limits = {
        "primal": tol * scale,
        "dual": tol * scale,
        "complementarity": tol * scale * scale,
        "pi_mismatch": tol * scale,
    }
    failed = [key for key, val in residuals.items() if val > limits[key]]
    return WitnessReport(ok=not failed, residuals=residuals, failed=failed)
