"""Observational-study extension: penalized logistic propensity and the weighted response."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .data import OBSERVATIONAL, Dataset, ModifiedResponse, modify_response
from .errors import Infeasible, NonConvergence, PropensityError, Separation
from .estimator import EstimatorConfig, FitResult, fit, fit_cv, soft_threshold
from .lp import EQ, LinearProgram, solve_lp

log = logging.getLogger(__name__)

OVERLAP_FLOOR = 1e-3


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _loss(xa, a, xi):
    eta = xa @ xi
    return float(np.mean(np.logaddexp(0.0, eta) - a * eta))


@dataclass
class PropensityFit:
    xi: np.ndarray
    lambda_p: float
    fitted: np.ndarray
    objective_trace: np.ndarray
    iterations: int

    def predict(self, x):
        return _logistic(self.xi[0] + np.asarray(x, dtype=float) @ self.xi[1:])


def separable(x, a):
    """True when some linear score puts every treated row strictly above every control row.

    By Gordan's alternative, rows ``z_i = (2A_i - 1)(1, x_i)`` admit ``xi``
    with ``z_i' xi > 0`` for all ``i`` exactly when no convex combination of
    the ``z_i`` is zero. The latter is a small LP with ``p + 2`` rows.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    sgn = 2.0 * np.asarray(a, dtype=float) - 1.0
    z = np.column_stack([np.ones(n), x]) * sgn[:, None]
    rows = np.vstack([z.T, np.ones(n)])
    rhs = np.zeros(rows.shape[0])
    rhs[-1] = 1.0
    try:
        solve_lp(LinearProgram(np.zeros(n), rows, [EQ] * rows.shape[0], rhs))
    except Infeasible:
        return True
    return False


def fit_propensity(x, a, lambda_p, tol=1e-6, max_iter=20000):
    """L1-penalized logistic regression with an unpenalized intercept.

    Minimizes ``mean(log(1 + e^eta) - A eta) + lambda_p ||slopes||_1`` by
    proximal gradient with backtracking, stopping once the minimum-norm
    subgradient is below ``tol`` in max-norm.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    n, p = x.shape
    abar = a.mean()
    if abar in (0.0, 1.0):
        raise PropensityError("treatment is constant; propensity model is not identified")
    if lambda_p < 0:
        raise PropensityError("lambda_p must be nonnegative")
    if lambda_p == 0 and separable(x, a):
        raise Separation("treatment is perfectly separable; unpenalized fit diverges")
    xa = np.column_stack([np.ones(n), x])
    xi = np.zeros(p + 1)
    xi[0] = np.log(abar / (1.0 - abar))
    step = 4.0 * n / max(np.linalg.norm(xa, 2) ** 2, 1e-12)

    def objective(v):
        return _loss(xa, a, v) + lambda_p * np.abs(v[1:]).sum()

    def optimality(v, g):
        gs = g[1:]
        sub = np.where(v[1:] != 0, np.abs(gs + lambda_p * np.sign(v[1:])),
                       np.maximum(np.abs(gs) - lambda_p, 0.0))
        return max(abs(g[0]), sub.max(initial=0.0))

    f = _loss(xa, a, xi)
    trace = [f + lambda_p * np.abs(xi[1:]).sum()]
    for it in range(1, max_iter + 1):
        g = xa.T @ (_logistic(xa @ xi) - a) / n
        if optimality(xi, g) <= tol:
            break
        t = step * 2.0
        while True:
            z = xi - t * g
            new = np.concatenate(([z[0]], soft_threshold(z[1:], t * lambda_p)))
            diff = new - xi
            f_new = _loss(xa, a, new)
            if f_new <= f + g @ diff + (diff @ diff) / (2.0 * t) + 1e-15 * abs(f):
                break
            t *= 0.5
        step = t
        xi, f = new, f_new
        trace.append(objective(xi))
        if lambda_p == 0 and (f < 1e-10 or np.abs(xi).max() > 1e6):
            raise Separation("treatment is perfectly separable; unpenalized fit diverges")
    else:
        raise NonConvergence(f"propensity fit did not converge in {max_iter} iterations")
    pf = PropensityFit(xi, float(lambda_p), np.empty(n), np.array(trace), it)
    pf.fitted = pf.predict(x)
    return pf


def propensity_lambda_max(x, a):
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    return float(np.abs(x.T @ (a - a.mean())).max() / x.shape[0])


def cv_propensity_lambda(x, a, folds=5, seed=0, num=10, ratio=0.01):
    """``lambda_p`` minimizing held-out logistic deviance; ties go to the larger value."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    n = x.shape[0]
    lmax = propensity_lambda_max(x, a)
    grid = lmax * np.geomspace(1.0, ratio, num)
    perm = np.random.default_rng(np.random.SeedSequence([seed, 0x9E0])).permutation(n)
    parts = np.array_split(perm, folds)
    dev = np.zeros(num)
    for k, test in enumerate(parts):
        train = np.concatenate([q for m, q in enumerate(parts) if m != k])
        if a[train].min() == a[train].max():
            continue
        for i, lam in enumerate(grid):
            pf = fit_propensity(x[train], a[train], lam, tol=1e-5)
            pi = np.clip(pf.predict(x[test]), 1e-12, 1 - 1e-12)
            dev[i] -= np.sum(a[test] * np.log(pi) + (1 - a[test]) * np.log(1 - pi))
    best = dev.min()
    return float(grid[np.flatnonzero(dev == best)[0]])


def overlap_flagged(pi, floor=OVERLAP_FLOOR):
    """True when some fitted propensity is within ``floor`` of 0 or 1 (on ``pi(1 - pi)``)."""
    return bool(np.min(pi * (1.0 - pi)) < floor)


@dataclass
class ObservationalFit:
    fit: FitResult
    propensity: PropensityFit
    ytilde: ModifiedResponse
    overlap_warning: bool


def obs_pipeline(d: Dataset, lambda_p: Optional[float] = None,
                 cfg: EstimatorConfig = EstimatorConfig(), grid=None, cv=True,
                 propensity: Optional[np.ndarray] = None):
    """Propensity fit, inverse-weighted response ``4(A - pi)Y``, then the profiled fit.

    ``lambda_p=None`` selects the propensity penalty by 5-fold CV. Passing
    ``propensity`` skips the logistic fit and uses the given scores. ``cv``
    chooses between :func:`fit_cv` over ``grid`` and a single fit at
    ``cfg.lam``.
    """
    if propensity is None:
        if lambda_p is None:
            lambda_p = cv_propensity_lambda(d.x, d.a, folds=cfg.cv_folds, seed=cfg.seed)
        pf = fit_propensity(d.x, d.a, lambda_p)
    else:
        pi = np.asarray(propensity, dtype=float)
        pf = PropensityFit(np.full(d.p + 1, np.nan), float("nan"), pi, np.array([]), 0)
    warn = overlap_flagged(pf.fitted)
    if warn:
        log.warning("propensity scores near 0 or 1: min pi(1-pi) = %.2e",
                    float(np.min(pf.fitted * (1 - pf.fitted))))
    yt = modify_response(d, OBSERVATIONAL, pf.fitted)
    res = fit_cv(d, yt, cfg, grid) if cv else fit(d, yt, cfg)
    return ObservationalFit(res, pf, yt, warn)
