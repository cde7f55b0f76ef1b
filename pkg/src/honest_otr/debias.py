"""Nodewise Dantzig approximate inverse, debiased coefficients and marginal intervals."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AlphaOutOfRange, DebiasError, Infeasible, SolverFailure, ZeroTau
from .estimator import _arrays, score_from_smoother
from .lp import GE, LE, LinearProgram, solve_lp
from .smoother import bandwidth, loo_smooth

DEFAULT_ETA_MULT = 25.0


# -- standard normal quantile (Wichura, AS 241 PPND16) -----------------------

_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
      21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
      5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494, 0.68976733498510000455,
      0.14810397642748007459, 0.0151986665636164571966, 5.475938084995344946e-4,
      1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531, 0.0148753612908506148525,
      7.868691311456132591e-4, 1.8463183175100546818e-5, 1.4215117583164458887e-7,
      2.04426310338993978564e-15)


def _poly(coef, x):
    acc = 0.0
    for c in reversed(coef):
        acc = acc * x + c
    return acc


def norm_ppf(p):
    """Quantile of the standard normal distribution."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise AlphaOutOfRange(f"probability {p} outside (0, 1)")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r -= 1.6
        z = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        z = _poly(_E, r) / _poly(_F, r)
    return -z if q < 0 else z


# -- nodewise Dantzig --------------------------------------------------------

def dantzig_lp(gram, k, eta):
    """Split-variable LP for coordinate ``k`` (0-based within ``gram``).

    Variables are ``(xi_plus, xi_minus) >= 0``; the rows bound
    ``gram[-k, k] - gram[-k, -k] v`` to ``[-eta, eta]`` with ``v = xi_plus - xi_minus``.
    """
    others = np.delete(np.arange(gram.shape[0]), k)
    m = gram[np.ix_(others, others)]
    c = gram[others, k]
    q = others.size
    a = np.vstack([np.hstack([m, -m]), np.hstack([m, -m])])
    rhs = np.concatenate([c - eta, c + eta])
    return LinearProgram(np.ones(2 * q), a, [GE] * q + [LE] * q, rhs)


def nodewise_dantzig(gram, k, eta):
    """L1-minimal ``v`` with ``||gram[-k, k] - gram[-k, -k] v||_inf <= eta``."""
    if not eta > 0:
        raise DebiasError("eta must be positive")
    if gram.shape[0] < 2:
        return np.zeros(0)
    try:
        sol, _ = solve_lp(dantzig_lp(gram, k, eta))
    except Infeasible as exc:
        raise SolverFailure(f"Dantzig program for coordinate {k + 2} infeasible") from exc
    q = gram.shape[0] - 1
    return sol[:q] - sol[q:]


def weighted_gram(xhat_rest, g1):
    """``n^-1 sum_i G1_i^2 xhat_i xhat_i'`` over coordinates 2..p."""
    n = xhat_rest.shape[0]
    w = xhat_rest * (g1 ** 2)[:, None]
    return (w.T @ xhat_rest) / n


@dataclass
class NodewiseInverse:
    d: np.ndarray
    phi: np.ndarray
    tau2: np.ndarray
    theta: np.ndarray
    eta: float
    xhat: np.ndarray
    g1: np.ndarray
    ghat: np.ndarray
    gram: np.ndarray
    bandwidth: float
    computed: np.ndarray


def _columns(coords, q):
    if coords is None:
        return np.arange(q)
    cols = np.unique(np.asarray(list(coords), dtype=int)) - 2
    if cols.size == 0 or cols.min() < 0 or cols.max() >= q:
        raise DebiasError(f"coefficient positions must lie in 2..{q + 1}")
    return cols


def build_theta(beta_hat, d, ytilde, eta=None, eta_mult=DEFAULT_ETA_MULT, workers=1,
                coords=None):
    """Approximate inverse of the score Jacobian at ``beta_hat``.

    Column ``j`` is ``phi_j / tau_j^2`` with ``phi_j`` built from the nodewise
    Dantzig solution for coordinate ``j`` and
    ``tau_j^2 = n^-1 sum G1^2 xhat_j xhat_{-1}' phi_j``. ``eta`` defaults to
    ``eta_mult`` times the bandwidth at ``beta_hat``.

    ``coords`` (1-based positions in 2..p) restricts the work to those
    columns; the others are left as NaN. An interval for ``beta_j`` or a
    test on a group only needs the columns it touches.
    """
    beta_hat = getattr(beta_hat, "beta", beta_hat)
    x, yt = _arrays(d, ytilde)
    u = x @ beta_hat
    h = bandwidth(u)
    sm = loo_smooth(u, yt, x, h)
    if eta is None:
        eta = eta_mult * h
    xhat = x - sm.ehat
    gram = weighted_gram(xhat[:, 1:], sm.g1hat)
    q = gram.shape[0]
    cols = _columns(coords, q)

    def solve(k):
        return nodewise_dantzig(gram, k, eta)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            dsol = list(pool.map(solve, cols))
    else:
        dsol = [solve(k) for k in cols]

    dmat = np.full((q, max(q - 1, 0)), np.nan)
    phi = np.full((q, q), np.nan)
    tau2 = np.full(q, np.nan)
    for k, dk in zip(cols, dsol):
        dmat[k] = dk
        col = np.insert(-dk, k, 1.0)
        phi[:, k] = col
        tau2[k] = gram[k] @ col
        if not abs(tau2[k]) >= 1e-12:
            raise ZeroTau(k + 2, tau2[k])
    theta = phi / tau2[None, :]
    return NodewiseInverse(dmat, phi, tau2, theta, float(eta), xhat, sm.g1hat, sm.ghat, gram, h,
                           cols)


# -- debiasing and variance --------------------------------------------------

def debias(beta_hat, theta, s):
    """``beta_hat[1:] - theta' s``."""
    beta_hat = getattr(beta_hat, "beta", beta_hat)
    th = getattr(theta, "theta", theta)
    return np.asarray(beta_hat, dtype=float)[1:] - th.T @ np.asarray(s, dtype=float)


def estimate_variance(theta, ytilde):
    """Sandwich ``theta' {n^-1 sum r_i^2 G1_i^2 xhat_i xhat_i'} theta``."""
    yt = getattr(ytilde, "values", ytilde)
    resid = np.asarray(yt, dtype=float) - theta.ghat
    mid = weighted_gram(theta.xhat[:, 1:], resid * theta.g1)
    sigma = theta.theta.T @ mid @ theta.theta
    return 0.5 * (sigma + sigma.T)


def marginal_ci(beta_tilde, sigma_diag, n, alpha=0.05):
    """Normal intervals ``beta_tilde +/- z_{1-alpha/2} sqrt(sigma_jj / n)``, shape (p-1, 2)."""
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha={alpha} must lie in (0, 1)")
    z = norm_ppf(1.0 - alpha / 2.0)
    half = z * np.sqrt(np.maximum(np.asarray(sigma_diag, dtype=float), 0.0) / n)
    bt = np.asarray(beta_tilde, dtype=float)
    return np.column_stack([bt - half, bt + half])


@dataclass
class DebiasResult:
    beta_hat: np.ndarray
    beta_tilde: np.ndarray
    sigma: np.ndarray
    sigma_diag: np.ndarray
    intervals: np.ndarray
    alpha: float
    n: int
    nodewise: NodewiseInverse
    residual_terms: np.ndarray


def infer(fit_result, d, ytilde, alpha=0.05, eta=None, eta_mult=DEFAULT_ETA_MULT, workers=1,
          coords=None):
    """Debiased estimate, sandwich variance and marginal intervals at a fitted ``beta``.

    With ``coords`` only those positions are debiased; entries for the
    others are NaN.
    """
    beta_hat = getattr(fit_result, "beta", fit_result)
    x, yt = _arrays(d, ytilde)
    nw = build_theta(beta_hat, x, yt, eta=eta, eta_mult=eta_mult, workers=workers,
                     coords=coords)
    resid = yt - nw.ghat
    s = -((resid * nw.g1) @ nw.xhat[:, 1:]) / x.shape[0]
    bt = debias(beta_hat, nw, s)
    sigma = estimate_variance(nw, yt)
    sd = np.diag(sigma).copy()
    ci = marginal_ci(bt, sd, x.shape[0], alpha)
    return DebiasResult(np.asarray(beta_hat, dtype=float), bt, sigma, sd, ci, alpha,
                        x.shape[0], nw, resid * nw.g1)
