"""Dense two-phase primal simplex with Bland's anti-cycling rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .errors import Infeasible, IterationLimit, SolverFailure, Unbounded

LE, GE, EQ = "<=", ">=", "="


@dataclass
class LinearProgram:
    """``minimize c'x`` subject to ``a[i] x (<=|>=|=) rhs[i]`` and ``x >= lower``."""

    objective: np.ndarray
    a: np.ndarray
    senses: Sequence[str]
    rhs: np.ndarray
    lower: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        m = self.objective.size
        self.a = np.asarray(self.a, dtype=float).reshape(-1, m)
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.senses = list(self.senses)
        self.lower = np.zeros(m) if self.lower is None else np.asarray(self.lower, dtype=float)
        if m < 1:
            raise SolverFailure("linear program needs at least one variable")
        if self.a.shape[0] != self.rhs.size or len(self.senses) != self.rhs.size:
            raise SolverFailure("constraint rows, senses and rhs disagree in length")
        if any(s not in (LE, GE, EQ) for s in self.senses):
            raise SolverFailure(f"unknown constraint sense in {self.senses}")
        if not (np.isfinite(self.a).all() and np.isfinite(self.rhs).all()
                and np.isfinite(self.objective).all() and np.isfinite(self.lower).all()):
            raise SolverFailure("linear program has non-finite coefficients")


def _run(t, basis, n_eligible, tol, max_iter):
    status, pivots = _backend.simplex_iterate(t, basis, n_eligible, tol, max_iter)
    if status == _backend.UNBOUNDED:
        raise Unbounded("objective is unbounded below")
    if status == _backend.ITERATION_LIMIT:
        raise IterationLimit(f"simplex did not finish within {max_iter} pivots")
    return pivots


def solve_lp(lp: LinearProgram, tol=1e-9, max_iter=None):
    """Optimal basic feasible solution of ``lp``.

    Returns ``(x, objective_value)``. Raises :class:`Infeasible`,
    :class:`Unbounded` or :class:`IterationLimit`.
    """
    c, a, lower = lp.objective, lp.a.copy(), lp.lower
    m = c.size
    b = lp.rhs - a @ lower
    senses = list(lp.senses)
    for i in np.flatnonzero(b < 0):
        a[i] *= -1.0
        b[i] *= -1.0
        senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]
    k = b.size

    n_slack = sum(s != EQ for s in senses)
    art_rows = [i for i, s in enumerate(senses) if s != LE]
    art_start = m + n_slack
    ncol = art_start + len(art_rows)
    t = np.zeros((k + 1, ncol + 1))
    t[:k, :m] = a
    t[:k, ncol] = b
    basis = np.empty(k, dtype=np.int64)
    col = m
    for i, s in enumerate(senses):
        if s == LE:
            t[i, col] = 1.0
            basis[i] = col
        elif s == GE:
            t[i, col] = -1.0
        if s != EQ:
            col += 1
    for r, i in enumerate(art_rows):
        t[i, art_start + r] = 1.0
        basis[i] = art_start + r
    if max_iter is None:
        max_iter = 50 * (k + ncol) + 1000
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))

    if art_rows:
        t[k, :art_start] = -t[art_rows, :art_start].sum(axis=0)
        t[k, ncol] = -t[art_rows, ncol].sum()
        _run(t, basis, ncol, tol, max_iter)
        if -t[k, ncol] > 1e-7 * scale:
            raise Infeasible(f"phase-one optimum {-t[k, ncol]:.3e} > 0")
        keep = np.ones(k, dtype=bool)
        for r in range(k):
            if basis[r] < art_start:
                continue
            cand = np.flatnonzero(np.abs(t[r, :art_start]) > tol)
            if cand.size == 0:
                keep[r] = False  # redundant row
                continue
            j = cand[0]
            t[r] /= t[r, j]
            f = t[:, j].copy()
            f[r] = 0.0
            t -= np.outer(f, t[r])
            basis[r] = j
        if not keep.all():
            t = np.ascontiguousarray(np.vstack([t[:k][keep], t[k:]]))
            basis = np.ascontiguousarray(basis[keep])
            k = basis.size

    cost = np.zeros(ncol + 1)
    cost[:m] = c
    cb = cost[basis]
    t[k] = cost - cb @ t[:k]
    _run(t, basis, art_start, tol, max_iter)

    z = np.zeros(ncol)
    z[basis] = t[:k, ncol]
    x = z[:m] + lower
    return x, float(c @ x)
