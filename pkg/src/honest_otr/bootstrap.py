"""Gaussian multiplier bootstrap for simultaneous tests on coefficient groups."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlphaOutOfRange, EmptyGroup, InvalidGroup, TooFewDraws

MIN_DRAWS = 100


def _stream(seed, b):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, b])))


def multipliers(n, draws, seed, start=0):
    """Standard normal multipliers, one independent stream per draw index."""
    return np.stack([_stream(seed, b).standard_normal(n) for b in range(start, start + draws)])


def bootstrap_draws(residual_terms, xhat_theta, draws, seed):
    """Bootstrap replicates ``delta*`` of shape (draws, |G|).

    ``delta*_j = n^-1 sum_i r_i residual_terms[i] xhat_theta[i, j]`` with
    i.i.d. N(0, 1) multipliers ``r`` keyed by ``(seed, draw index)``, so the
    first ``B`` draws do not depend on how many more are requested.
    """
    rt = np.asarray(residual_terms, dtype=float)
    xt = np.asarray(xhat_theta, dtype=float).reshape(rt.size, -1)
    n = rt.size
    r = multipliers(n, draws, seed)
    return (r * rt) @ xt / n


def critical_value(draw_maxima, alpha):
    """Empirical ``1 - alpha`` quantile: the ``ceil((1 - alpha) B)``-th order statistic."""
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha={alpha} must lie in (0, 1)")
    v = np.sort(np.asarray(draw_maxima, dtype=float))
    k = max(1, math.ceil(round((1.0 - alpha) * v.size, 9)))
    return float(v[k - 1])


@dataclass(frozen=True)
class GroupTestSpec:
    """``group`` holds coefficient positions in 2..p (1-based, as in ``beta``).

    ``draws`` is the number of bootstrap replicates ``B`` (at least 100).
    """

    group: tuple
    alpha: float = 0.05
    draws: int = 1000
    seed: int = 0

    def __post_init__(self):
        g = tuple(int(j) for j in self.group)
        if not g:
            raise EmptyGroup("group is empty")
        if len(set(g)) != len(g):
            raise InvalidGroup(f"duplicate indices in group {g}")
        if not 0.0 < self.alpha < 1.0:
            raise AlphaOutOfRange(f"alpha={self.alpha} must lie in (0, 1)")
        if self.draws < MIN_DRAWS:
            raise TooFewDraws(f"need at least {MIN_DRAWS} bootstrap draws, got {self.draws}")
        object.__setattr__(self, "group", g)


@dataclass
class GroupTestResult:
    statistic: float
    c_star: float
    reject: bool
    p_value: float
    draw_maxima: np.ndarray = field(repr=False)
    group: tuple
    alpha: float


def group_test(result, spec: GroupTestSpec):
    """Test ``beta_j = 0`` for all ``j`` in the group from a debiased fit.

    ``result`` is a :class:`~honest_otr.debias.DebiasResult`. The statistic
    ``sqrt(n) max_G |beta~_j|`` is compared with the bootstrap quantile of
    ``sqrt(n) max_G |delta*_j|``; rejection is strict (``>``) and the p-value
    counts draws ``>=`` the statistic.
    """
    q = result.beta_tilde.size
    for j in spec.group:
        if not 2 <= j <= q + 1:
            raise InvalidGroup(f"group index {j} outside 2..{q + 1}")
    cols = np.array(sorted(spec.group)) - 2
    computed = getattr(result.nodewise, "computed", None)
    if computed is not None and not np.isin(cols, computed).all():
        raise InvalidGroup(f"group {spec.group} uses positions that were not debiased")
    n = result.n
    root_n = np.sqrt(n)
    stat = float(root_n * np.abs(result.beta_tilde[cols]).max())
    xt = result.nodewise.xhat[:, 1:] @ result.nodewise.theta[:, cols]
    delta = bootstrap_draws(result.residual_terms, xt, spec.draws, spec.seed)
    maxima = root_n * np.abs(delta).max(axis=1)
    c = critical_value(maxima, spec.alpha)
    pval = float(np.mean(maxima >= stat))
    return GroupTestResult(stat, c, bool(stat > c), pval, maxima, tuple(sorted(spec.group)), spec.alpha)
