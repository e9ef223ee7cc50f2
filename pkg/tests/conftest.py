import itertools
import math

import numpy as np
import pytest
from scipy import integrate
from scipy.optimize import lsq_linear

from weightedcs.distributions import FiniteMixture


def descent_cone_generators(w, support):
    """Generators of D(I, w): +-e_j/w_j - y for j off the support, +-(e_i/w_i - y) on it.

    ``y = (1/k) sum_I e_i / w_i`` has unit weighted norm; the second family
    spans the lineality space.  Built from the definition of the descent
    cone, independently of the closed-form projection code.
    """
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    support = list(support)
    y = np.zeros(d)
    y[support] = 1.0 / (len(support) * w[support])
    gens = []
    for i in range(d):
        for s in (1.0, -1.0):
            e = np.zeros(d)
            e[i] = s / w[i]
            gens.append(e - y)
    return np.array(gens).T


def qp_projection(w, support, z):
    """Projection onto the descent cone by nonnegative least squares (bounded-variable active set).

    ``scipy.optimize.nnls`` is avoided: on some scipy releases it stops at
    non-optimal points for these generator sets.
    """
    G = descent_cone_generators(w, support)
    res = lsq_linear(G, np.asarray(z, dtype=float), bounds=(0.0, np.inf), method="bvls", tol=1e-15)
    return G @ res.x


def wedge_volumes(w_support, w_off):
    """Exact intrinsic volumes of the planar cone {v : w1 v1 + w2 |v2| <= 0}."""
    theta = 2.0 * math.atan(w_support / w_off)
    return np.array([(math.pi - theta) / (2 * math.pi), 0.5, theta / (2 * math.pi)])


def quad_j(lam, power):
    val, _ = integrate.quad(lambda u: (u - lam) ** power * math.exp(-0.5 * u * u), lam, np.inf,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def lp_vertex_oracle(A, y, w):
    """Minimum of sum w_i |x_i| s.t. Ax = y by enumerating basic feasible solutions.

    Standard form over x = u - v with u, v >= 0: every vertex of
    {B z = y, z >= 0} uses at most m linearly independent columns of [A, -A].
    """
    A = np.asarray(A, dtype=float)
    m, d = A.shape
    B = np.hstack([A, -A])
    c = np.concatenate([w, w])
    best = math.inf
    for cols in itertools.combinations(range(2 * d), m):
        Bs = B[:, cols]
        if abs(np.linalg.det(Bs)) < 1e-12:
            continue
        zs = np.linalg.solve(Bs, y)
        if np.all(zs >= -1e-12):
            best = min(best, float(c[list(cols)] @ zs))
    return best


@pytest.fixture
def wedge():
    return FiniteMixture(2, [[0]], [1.0])


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
