"""Penalized profiled estimating equation for the index coefficient.

The fit is a composite gradient method: a gradient step on the profiled score,
soft-thresholding, then Euclidean projection onto an L1 ball. The step-size
parameter doubles every iteration, so the steps shrink geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .data import Dataset, ModifiedResponse
from .errors import EmptyGrid, EstimatorError, NonFinite
from .smoother import bandwidth, loo_smooth, nw_predict

EXACT = "exact"
PAPER = "paper"


def _arrays(d, ytilde):
    x = d.x if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    yt = ytilde.values if isinstance(ytilde, ModifiedResponse) else np.asarray(ytilde, dtype=float)
    return x, yt


def score_from_smoother(sm, x, ytilde):
    """Profiled score given precomputed leave-one-out fits."""
    n = x.shape[0]
    resid = ytilde - sm.ghat
    xhat = x[:, 1:] - sm.ehat[:, 1:]
    return -((resid * sm.g1hat) @ xhat) / n


def score(beta, d, ytilde, h=None):
    """Profiled semiparametric score ``S_n(beta)``, a vector of length p - 1.

    ``-n^-1 sum_i [Y~_i - G(u_i)] G1(u_i) [x_{i,-1} - E(x_{i,-1} | u_i)]`` with
    leave-one-out fits at ``u = x @ beta``. ``h`` defaults to the
    rule-of-thumb bandwidth of the index.
    """
    x, yt = _arrays(d, ytilde)
    beta = np.asarray(beta, dtype=float)
    u = x @ beta
    sm = loo_smooth(u, yt, x, bandwidth(u) if h is None else h)
    return score_from_smoother(sm, x, yt)


def soft_threshold(v, t):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_l1(v, rho):
    """Euclidean projection of ``v`` onto ``{w : ||w||_1 <= rho}``.

    Sort-and-threshold: with ``b`` the sorted magnitudes, the threshold is
    ``(sum_{r<=J} b_r - rho) / J`` for the largest ``J`` keeping ``b_J`` above it.
    """
    v = np.asarray(v, dtype=float)
    if np.abs(v).sum() <= rho:
        return v.copy()
    b = np.sort(np.abs(v))[::-1]
    cs = np.cumsum(b)
    j = np.arange(1, b.size + 1)
    big = np.flatnonzero(b - (cs - rho) / j > 0)
    J = big[-1] + 1
    delta = (cs[J - 1] - rho) / J
    return soft_threshold(v, delta)


def proximal_step(beta, s, gamma, lam, rho, convention=EXACT):
    """One composite-gradient update of ``beta[1:]``; ``beta[0]`` stays 1.

    With the exact convention the soft-threshold level is ``lam / gamma``,
    which makes the update the minimizer of
    ``gamma/2 ||b - beta||^2 + s'(b - beta) + lam ||b||_1`` over the L1 ball.
    The ``paper`` convention thresholds at ``lam``.
    """
    beta = np.asarray(beta, dtype=float)
    thr = lam / gamma if convention == EXACT else lam
    rest = soft_threshold(beta[1:] - np.asarray(s) / gamma, thr)
    if np.isfinite(rho):
        rest = project_l1(rest, rho)
    return np.concatenate(([1.0], rest))


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning for the profiled fit.

    ``gamma0="auto"`` sets the initial step-size parameter to the mean
    diagonal of the weighted Gram matrix ``n^-1 sum G1^2 xhat xhat'`` at the
    starting point, which keeps the first step on the scale of the score's
    Jacobian whatever the units of the outcome.
    """

    lam: float = 1.0
    rho: float = 10.0
    gamma0: Union[float, str] = "auto"
    gamma0_scale: float = 0.5
    max_iter: int = 200
    rel_tol: float = 0.01
    cv_folds: int = 5
    seed: int = 0
    threshold_convention: str = EXACT
    cv_mode: str = "out_of_fold"
    init_ridge: float = 100.0
    init_threshold: float = 0.0
    grid_num: int = 10
    grid_lo: float = 0.2
    grid_hi: float = 5.0

    def __post_init__(self):
        if not self.lam > 0:
            raise EstimatorError("lambda must be positive")
        if not self.rho > 0:
            raise EstimatorError("rho must be positive")
        if self.gamma0 != "auto" and not float(self.gamma0) > 0:
            raise EstimatorError("gamma0 must be positive or 'auto'")
        if self.max_iter < 1:
            raise EstimatorError("max_iter must be at least 1")
        if self.threshold_convention not in (EXACT, PAPER):
            raise EstimatorError(f"unknown threshold convention {self.threshold_convention!r}")
        if self.cv_mode not in ("out_of_fold", "in_sample"):
            raise EstimatorError(f"unknown cv mode {self.cv_mode!r}")
        if self.cv_folds < 2:
            raise EstimatorError("cv_folds must be at least 2")
        if self.grid_num < 1 or not 0 < self.grid_lo <= self.grid_hi:
            raise EstimatorError("grid needs num >= 1 and 0 < lo <= hi")


@dataclass
class FitResult:
    beta: np.ndarray
    lambda_used: float
    iterations: int
    model_err_trace: np.ndarray
    converged: bool
    gamma0: float
    bandwidth: float
    cv_curve: Optional[dict] = field(default=None, repr=False)


def initial_beta(x, ytilde, ridge=100.0, threshold=0.0):
    """Starting value from a ridge fit of ``Y~`` on all covariates.

    The ridge coefficients are rescaled so the first equals one, then the rest
    are soft-thresholded at ``threshold`` times a universal level
    ``sigma * sqrt(2 log p)`` with ``sigma`` the MAD scale of the rescaled
    entries. Returns zeros for ``beta[1:]`` if the first ridge coefficient
    vanishes.
    """
    n, p = x.shape
    xc = x - x.mean(axis=0)
    yc = ytilde - ytilde.mean()
    pen = ridge * n
    if p > n:
        b = xc.T @ np.linalg.solve(xc @ xc.T + pen * np.eye(n), yc)
    else:
        b = np.linalg.solve(xc.T @ xc + pen * np.eye(p), xc.T @ yc)
    scale = np.abs(b).max()
    if not np.isfinite(b).all() or scale == 0 or abs(b[0]) < 1e-8 * scale:
        return np.concatenate(([1.0], np.zeros(p - 1)))
    rest = b[1:] / b[0]
    if threshold > 0:
        sigma = np.median(np.abs(rest - np.median(rest))) / 0.6745
        rest = soft_threshold(rest, threshold * sigma * np.sqrt(2.0 * np.log(p)))
    return np.concatenate(([1.0], rest))


def _auto_gamma0(sm, x):
    xhat = x[:, 1:] - sm.ehat[:, 1:]
    g = float(np.mean(sm.g1hat ** 2 * np.mean(xhat ** 2, axis=1)))
    return g if g > 0 and np.isfinite(g) else 1.0


def fit(d, ytilde, cfg: EstimatorConfig = EstimatorConfig(), beta0=None):
    """Solve the penalized profiled estimating equation from ``beta0``.

    Each iteration refreshes the bandwidth and leave-one-out fits at the
    current iterate, records the in-sample model error, takes a proximal
    step, and doubles the step-size parameter. Iteration continues while the
    coefficient change exceeds ``rel_tol`` times the current norm or the model
    error is still decreasing, up to ``max_iter``.
    """
    x, yt = _arrays(d, ytilde)
    n, p = x.shape
    if beta0 is None:
        beta0 = initial_beta(x, yt, cfg.init_ridge, cfg.init_threshold)
    beta = np.asarray(beta0, dtype=float).copy()
    if beta.shape != (p,) or beta[0] != 1.0:
        raise EstimatorError("beta0 must have length p with first entry 1")
    if np.isfinite(cfg.rho):
        beta[1:] = project_l1(beta[1:], cfg.rho)

    coef_err = np.linalg.norm(beta) + 1.0
    prev_norm = np.linalg.norm(beta)
    err_last = err_before = float(np.var(yt))
    trace = []
    gamma = None
    gamma0 = None
    h = np.nan
    it = 0
    while coef_err > cfg.rel_tol * prev_norm or err_last < err_before:
        if it >= cfg.max_iter:
            break
        u = x @ beta
        h = bandwidth(u)
        sm = loo_smooth(u, yt, x, h)
        if gamma is None:
            if cfg.gamma0 == "auto":
                gamma = cfg.gamma0_scale * _auto_gamma0(sm, x)
            else:
                gamma = float(cfg.gamma0)
            gamma0 = gamma
        me = float(np.mean((yt - sm.ghat) ** 2))
        trace.append(me)
        err_before, err_last = err_last, me
        s = score_from_smoother(sm, x, yt)
        new = proximal_step(beta, s, gamma, cfg.lam, cfg.rho, cfg.threshold_convention)
        if not np.isfinite(new).all():
            raise NonFinite(f"iterate became non-finite at iteration {it + 1}")
        coef_err = np.linalg.norm(new - beta)
        prev_norm = np.linalg.norm(beta)
        beta = new
        gamma *= 2.0
        it += 1
    converged = not (coef_err > cfg.rel_tol * prev_norm or err_last < err_before)
    return FitResult(beta, cfg.lam, it, np.array(trace), converged, gamma0, float(h))


def lambda_grid(d, ytilde, cfg: EstimatorConfig = EstimatorConfig(), num=None, lo=None, hi=None):
    """Geometric grid of ``num`` values from ``lo`` to ``hi`` times ``||S_n(beta0)||_inf``.

    Unset arguments come from ``cfg.grid_num``, ``cfg.grid_lo`` and ``cfg.grid_hi``.
    """
    num = cfg.grid_num if num is None else num
    lo = cfg.grid_lo if lo is None else lo
    hi = cfg.grid_hi if hi is None else hi
    x, yt = _arrays(d, ytilde)
    b0 = initial_beta(x, yt, cfg.init_ridge, cfg.init_threshold)
    smax = float(np.abs(score(b0, x, yt)).max())
    return list(smax * np.geomspace(hi, lo, num))


def _folds(n, k, seed):
    perm = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D])).permutation(n)
    return np.array_split(perm, k)


def cv_curve(d, ytilde, grid, cfg: EstimatorConfig = EstimatorConfig()):
    """Cross-validated prediction error of ``Y~`` for each distinct ``lambda``.

    Returns ``{lambda: mse}``. Out-of-fold mode fits on the training folds
    and predicts held-out ``Y~`` with the training-fold smoother at the
    held-out index points; in-sample mode uses the full-data leave-one-out fit.
    """
    x, yt = _arrays(d, ytilde)
    n = x.shape[0]
    lams = sorted({float(v) for v in grid})
    if not lams:
        raise EmptyGrid("lambda grid is empty")
    if cfg.cv_mode == "in_sample":
        out = {}
        for lam in lams:
            res = fit(x, yt, replace(cfg, lam=lam))
            u = x @ res.beta
            sm = loo_smooth(u, yt, x, bandwidth(u))
            out[lam] = float(np.mean((yt - sm.ghat) ** 2))
        return out
    if n < 2 * cfg.cv_folds:
        raise EstimatorError(f"need n >= {2 * cfg.cv_folds} for {cfg.cv_folds}-fold CV")
    sse = dict.fromkeys(lams, 0.0)
    folds = _folds(n, cfg.cv_folds, cfg.seed)
    for k, test in enumerate(folds):
        train = np.concatenate([f for m, f in enumerate(folds) if m != k])
        xtr, ytr = x[train], yt[train]
        b0 = initial_beta(xtr, ytr, cfg.init_ridge, cfg.init_threshold)
        for lam in lams:
            res = fit(xtr, ytr, replace(cfg, lam=lam), beta0=b0)
            utr = xtr @ res.beta
            pred = nw_predict(x[test] @ res.beta, utr, ytr, bandwidth(utr))
            sse[lam] += float(np.sum((yt[test] - pred) ** 2))
    return {lam: sse[lam] / n for lam in lams}


def cross_validate(d, ytilde, grid, cfg: EstimatorConfig = EstimatorConfig()):
    """``lambda`` minimizing the CV error; ties go to the larger ``lambda``."""
    curve = cv_curve(d, ytilde, grid, cfg)
    best = min(curve.values())
    return max(lam for lam, v in curve.items() if v == best)


def fit_cv(d, ytilde, cfg: EstimatorConfig = EstimatorConfig(), grid=None):
    """Cross-validate ``lambda`` then refit on the full sample."""
    x, yt = _arrays(d, ytilde)
    if grid is None:
        grid = lambda_grid(x, yt, cfg)
    curve = cv_curve(x, yt, grid, cfg)
    best = min(curve.values())
    lam = max(v for v, e in curve.items() if e == best)
    res = fit(x, yt, replace(cfg, lam=lam))
    res.cv_curve = curve
    return res
