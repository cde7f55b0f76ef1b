"""Gaussian-kernel Nadaraya-Watson smoothing along a single index.

All fits use a Gaussian density kernel. Leave-one-out estimates at the sample
index points supply the link ``G``, its derivative ``G1`` and the conditional
covariate mean ``E(x | x'beta)`` that enter the profiled score.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DegenerateDenominator

BANDWIDTH_FLOOR = 1e-6
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def gaussian_kernel(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def bandwidth(index_values, floor=BANDWIDTH_FLOOR):
    """Rule-of-thumb bandwidth ``0.9 n^(-1/6) min(std, IQR/1.34)``, floored."""
    u = np.asarray(index_values, dtype=float)
    n = u.size
    sd = u.std(ddof=1)
    q75, q25 = np.percentile(u, [75, 25])
    h = 0.9 * n ** (-1.0 / 6.0) * min(sd, (q75 - q25) / 1.34)
    return max(h, floor) if np.isfinite(h) else floor


def nw_weights(t, index_values, h):
    """Normalized kernel weights ``K_h(t - u_i) / sum_j K_h(t - u_j)``."""
    u = np.atleast_1d(np.asarray(index_values, dtype=float))
    q = 0.5 * ((t - u) / h) ** 2
    if not np.isfinite(q).all():
        raise DegenerateDenominator()
    w = np.exp(-(q - q.min()))
    return w / w.sum()


@dataclass(frozen=True)
class SmootherEval:
    ghat: np.ndarray
    g1hat: np.ndarray
    ehat: np.ndarray
    bandwidth: float


def loo_smooth(index_values, ytilde, covariates, h):
    """Leave-one-out fits ``G(u_i)``, ``dG/dt(u_i)`` and ``E(x | u_i)``.

    The derivative is the exact quotient-rule derivative of the leave-one-out
    Nadaraya-Watson ratio.
    """
    u = np.asarray(index_values, dtype=float)
    if u.size < 2:
        raise DegenerateDenominator()
    if not (h > 0 and np.isfinite(u).all()):
        raise DegenerateDenominator()
    ghat, g1hat, ehat = _backend.loo_smooth(u, np.asarray(ytilde, dtype=float),
                                            np.asarray(covariates, dtype=float), float(h))
    x = np.asarray(covariates, dtype=float)
    const = (x == x[:1]).all(axis=0)
    if const.any():
        ehat[:, const] = x[0, const]
    if not (np.isfinite(ghat).all() and np.isfinite(g1hat).all()):
        bad = int(np.flatnonzero(~(np.isfinite(ghat) & np.isfinite(g1hat)))[0])
        raise DegenerateDenominator(bad)
    return SmootherEval(ghat, g1hat, ehat, float(h))


def smooth_at(beta, x, ytilde, h=None):
    """Leave-one-out smoother at index ``x @ beta`` with the rule-of-thumb bandwidth."""
    u = x @ beta
    if h is None:
        h = bandwidth(u)
    return loo_smooth(u, ytilde, x, h)


def nw_predict(t, index_train, y_train, h):
    """Nadaraya-Watson fit of ``y_train`` evaluated at new index points ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u = np.asarray(index_train, dtype=float)
    q = 0.5 * ((t[:, None] - u[None, :]) / h) ** 2
    q -= q.min(axis=1, keepdims=True)
    w = np.exp(-q)
    return (w @ y_train) / w.sum(axis=1)
