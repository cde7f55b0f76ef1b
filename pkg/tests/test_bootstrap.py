from types import SimpleNamespace

import numpy as np
import pytest

from honest_otr.bootstrap import (GroupTestSpec, bootstrap_draws, critical_value, group_test,
                                  multipliers)
from honest_otr.errors import AlphaOutOfRange, EmptyGroup, InvalidGroup, TooFewDraws


def test_critical_value_order_statistic():
    assert critical_value(np.arange(1, 101)[::-1], 0.05) == 95.0
    assert critical_value(np.full(200, 2.5), 0.05) == 2.5
    assert critical_value(np.arange(1, 1001), 0.1) == 900.0
    assert critical_value([7.0], 0.5) == 7.0
    with pytest.raises(AlphaOutOfRange):
        critical_value([1.0, 2.0], 0.0)


def test_zero_residuals_give_zero_draws():
    draws = bootstrap_draws(np.zeros(30), np.ones((30, 2)), 50, seed=1)
    assert draws.shape == (50, 2) and not draws.any()


def test_draws_deterministic_and_prefix_stable(rng):
    rt = rng.standard_normal(40)
    xt = rng.standard_normal((40, 3))
    one = bootstrap_draws(rt, xt, 1, seed=9)
    assert np.array_equal(one, bootstrap_draws(rt, xt, 1, seed=9))
    long = bootstrap_draws(rt, xt, 300, seed=9)
    assert np.array_equal(bootstrap_draws(rt, xt, 120, seed=9), long[:120])
    assert not np.array_equal(bootstrap_draws(rt, xt, 120, seed=10), long[:120])
    assert np.array_equal(multipliers(40, 5, 9, start=3), multipliers(40, 8, 9)[3:])


def test_draw_distribution_matches_gaussian_limit(rng):
    n, draws = 60, 10000
    rt = rng.standard_normal(n)
    xt = rng.standard_normal((n, 1))
    delta = bootstrap_draws(rt, xt, draws, seed=2)[:, 0]
    sd = np.sqrt(np.sum(rt ** 2 * xt[:, 0] ** 2)) / n
    assert abs(delta.mean()) <= 4 * sd / np.sqrt(draws)
    assert delta.std() / sd == pytest.approx(1.0, abs=0.05)


def fake_result(rng, n=64, q=4):
    nodewise = SimpleNamespace(xhat=rng.standard_normal((n, q + 1)), theta=np.eye(q))
    return SimpleNamespace(beta_tilde=np.zeros(q), n=n, nodewise=nodewise,
                           residual_terms=rng.standard_normal(n))


def test_group_permutation_invariance(rng):
    res = fake_result(rng)
    res.beta_tilde[:] = [0.1, -0.4, 0.05, 0.2]
    a = group_test(res, GroupTestSpec((2, 3, 5), draws=200, seed=4))
    b = group_test(res, GroupTestSpec((5, 2, 3), draws=200, seed=4))
    assert (a.statistic, a.c_star, a.p_value, a.reject) == (b.statistic, b.c_star, b.p_value, b.reject)
    assert a.group == (2, 3, 5)


def test_boundary_tie_does_not_reject(rng):
    res = fake_result(rng, n=64)
    base = group_test(res, GroupTestSpec((2,), draws=100, seed=0))
    res.beta_tilde[0] = base.c_star / 8.0  # sqrt(64) keeps the statistic exact
    tie = group_test(res, GroupTestSpec((2,), draws=100, seed=0))
    assert tie.statistic == tie.c_star
    assert not tie.reject
    assert tie.p_value == pytest.approx(0.06)  # order statistics 95..100
    res.beta_tilde[0] = np.nextafter(base.c_star, np.inf) / 8.0
    assert group_test(res, GroupTestSpec((2,), draws=100, seed=0)).reject


def test_zero_signal_p_value_one(rng):
    res = fake_result(rng)
    out = group_test(res, GroupTestSpec((2, 3), draws=100))
    assert out.statistic == 0.0 and out.p_value == 1.0 and not out.reject


def test_spec_validation(rng):
    with pytest.raises(EmptyGroup):
        GroupTestSpec(())
    with pytest.raises(InvalidGroup):
        GroupTestSpec((2, 2))
    with pytest.raises(TooFewDraws):
        GroupTestSpec((2,), draws=99)
    with pytest.raises(AlphaOutOfRange):
        GroupTestSpec((2,), alpha=1.0)
    res = fake_result(rng, q=4)
    for bad in (1, 6):
        with pytest.raises(InvalidGroup):
            group_test(res, GroupTestSpec((bad,), draws=100))
