"""Pure numpy implementations of the hot kernels.

Mirrors ``_core.pyx`` function for function; used when the compiled
extension is missing or ``HONEST_OTR_PURE=1`` is set.
"""

import numpy as np

OPTIMAL, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2


def loo_smooth(u, y, x, h):
    """Leave-one-out Gaussian Nadaraya-Watson fits at the sample points.

    Returns ``(ghat, g1hat, ehat)``. Each row of kernel weights is rescaled by
    its largest off-diagonal entry before exponentiation, so the denominators
    are at least one; the ratios are unaffected.
    """
    u = np.ascontiguousarray(u, dtype=float)
    d = (u[:, None] - u[None, :]) / h
    q = 0.5 * d * d
    np.fill_diagonal(q, np.inf)
    q -= q.min(axis=1, keepdims=True)
    w = np.exp(-q)
    s0 = w.sum(axis=1)
    wd = w * d
    wd *= -1.0 / h
    s1 = wd.sum(axis=1)
    ghat = (w @ y) / s0
    g1hat = (wd @ y) / s0 - ghat * (s1 / s0)
    ehat = (w @ x) / s0[:, None]
    return ghat, g1hat, ehat


STALL_LIMIT = 20


def simplex_iterate(t, basis, n_eligible, tol, max_iter):
    """Primal simplex pivots on a tableau, in place.

    ``t`` has the constraint rows first and the reduced-cost row last; the
    last column holds the right-hand side. Only the first ``n_eligible``
    columns may enter the basis. The entering column has the most negative
    reduced cost; after ``STALL_LIMIT`` consecutive degenerate pivots the
    rule switches to Bland's (lowest index enters, lowest basic index
    leaves on ties) until the objective moves again, which rules out
    cycling. Returns ``(status, pivots)``.
    """
    m = t.shape[0] - 1
    rhs = t.shape[1] - 1
    cost = t[m]
    stall = 0
    for it in range(max_iter):
        neg = np.flatnonzero(cost[:n_eligible] < -tol)
        if neg.size == 0:
            return OPTIMAL, it
        j = neg[0] if stall >= STALL_LIMIT else neg[np.argmin(cost[neg])]
        col = t[:m, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = t[rows, rhs] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = ties[np.argmin(basis[ties])]
        stall = stall + 1 if best <= 1e-12 else 0
        t[r] /= t[r, j]
        f = t[:, j].copy()
        f[r] = 0.0
        t -= np.outer(f, t[r])
        basis[r] = j
    return ITERATION_LIMIT, max_iter
