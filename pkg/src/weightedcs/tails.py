"""Gaussian tail integrals used by the statistical-dimension bounds.

    Q(x)  = int_x^inf exp(-u^2/2) du
    J1(x) = int_x^inf (u - x) exp(-u^2/2) du = exp(-x^2/2) - x Q(x)
    J2(x) = int_x^inf (u - x)^2 exp(-u^2/2) du = (1 + x^2) Q(x) - x exp(-x^2/2)

All three are written through the scaled complementary error function so
the leading ``exp(-x^2/2)`` factors out.  For larger arguments the
remainders ``1 - x R`` and ``(1 + x^2) R - x`` (``R`` the Mills ratio)
cancel badly; there they come from Laplace's continued fraction

    1/R = x + T1,  T_k = k / (x + T_{k+1}),

which gives ``1 - x R = R T1`` and ``(1 + x^2) R - x = R T1 T2``.
"""

import numpy as np
from scipy.special import erfcx

SQRT_HALF_PI = np.sqrt(np.pi / 2.0)
SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)

# mills(x) = exp(x^2/2) Q(x)
def _mills(x):
    return SQRT_HALF_PI * erfcx(x / np.sqrt(2.0))


CF_CUTOFF = 1.5
CF_TERMS = 400


def _cf_tails(x):
    """``(T1, T2)`` of the Mills-ratio continued fraction by backward recurrence."""
    t = np.zeros_like(x)
    for k in range(CF_TERMS, 1, -1):
        t = k / (x + t)
    t2 = t
    return 1.0 / (x + t2), t2


def _remainders(x):
    """``(1 - x R, (1 + x^2) R - x)`` without cancellation."""
    R = _mills(x)
    r1 = 1.0 - x * R
    r2 = (1.0 + x * x) * R - x
    big = x >= CF_CUTOFF
    if np.any(big):
        t1, t2 = _cf_tails(x[big])
        r1[big] = R[big] * t1
        r2[big] = R[big] * t1 * t2
    return r1, r2


def _check(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("tail integrals are defined here for x >= 0")
    return x


def _out(val, x):
    return float(val) if np.ndim(x) == 0 else val


def gaussian_q(x):
    x = _check(x)
    with np.errstate(over="ignore", under="ignore"):
        val = np.exp(-0.5 * x * x) * _mills(x)
    return _out(val, x)


def moment_j1(x):
    x = _check(x)
    with np.errstate(under="ignore"):
        val = np.exp(-0.5 * x * x) * _remainders(np.atleast_1d(x))[0].reshape(x.shape)
    return _out(val, x)


def moment_j2(x):
    x = _check(x)
    with np.errstate(under="ignore"):
        val = np.exp(-0.5 * x * x) * _remainders(np.atleast_1d(x))[1].reshape(x.shape)
    return _out(val, x)
