import json
import math

import numpy as np
import pytest

from honest_otr.data import Dataset
from honest_otr.errors import LengthMismatch, NoMatches, SimulationError, UnknownDesign
from honest_otr.estimator import EstimatorConfig
from honest_otr.simulation import (AR_DISCRETE, OPTIMAL_VALUE, UNIFORM_NONINDEX, CampaignConfig,
                                   ScenarioSpec, aggregate, evaluate_match_ratio, f0_logistic20,
                                   f0_ring, generate, match_ratio, optimal_rule, run_monte_carlo,
                                   sample_covariates, support_metrics, value_estimate,
                                   write_report)


def test_link_values():
    assert f0_logistic20(0.0) == 0.0
    u = np.linspace(-30, 30, 601)
    assert np.array_equal(f0_logistic20(u), -f0_logistic20(-u))
    assert f0_logistic20(1.0) == pytest.approx(20 * (1 / (1 + math.exp(-1)) - 0.5), rel=1e-14)
    assert f0_logistic20(1.0) == pytest.approx(4.621172, abs=5e-7)
    assert f0_ring(np.array([[0.0, 0.0]])) == pytest.approx(-7.2)
    assert f0_ring(np.array([[0.6, 0.0], [1.0, 0.0]])).tolist() == pytest.approx([0.0, 0.0], abs=1e-12)


def test_design_defaults():
    a = ScenarioSpec(p=8)
    assert a.beta.tolist() == [1.0, -1.0, -0.5, 0.4, -0.3, 0.0, 0.0, 0.0]
    assert a.eta_main[:5] == (0.5, 0.5, -0.5, -0.5, 0.0)
    b = ScenarioSpec(design=AR_DISCRETE, p=8)
    assert b.beta0[:6] == (1.0, -1.0, -0.8, 0.6, -0.5, 0.0)
    c = ScenarioSpec(design=UNIFORM_NONINDEX, p=4)
    assert c.eta_main == (2.0, 1.0, 0.5, 0.0)
    assert OPTIMAL_VALUE == {"gaussian_iid": 3.423, "uniform_nonindex": 2.443}


def test_spec_validation():
    with pytest.raises(UnknownDesign):
        ScenarioSpec(design="nope")
    with pytest.raises(LengthMismatch):
        ScenarioSpec(p=3, beta0=(1.0, 0.0))
    with pytest.raises(SimulationError):
        ScenarioSpec(p=2, beta0=(2.0, 0.0))
    with pytest.raises(SimulationError):
        ScenarioSpec(treatment="coin")


def test_generate_deterministic_and_distinct():
    spec = ScenarioSpec(n=50, p=10, seed=3)
    assert generate(spec, 4) == generate(spec, 4)
    assert not np.array_equal(generate(spec, 4).x, generate(spec, 5).x)
    assert not np.array_equal(generate(spec, 4).y, generate(ScenarioSpec(n=50, p=10, seed=4), 4).y)


def test_gaussian_moments():
    n = 10_000
    x = generate(ScenarioSpec(n=n, p=20, seed=1), 0).x
    assert np.all(np.abs(x.mean(axis=0)) <= 4 / math.sqrt(n))
    assert np.all(np.abs(x.var(axis=0) - 1) <= 4 * math.sqrt(2 / n))


def test_ar_discrete_layout():
    spec = ScenarioSpec(design=AR_DISCRETE, n=20_000, p=10, seed=2)
    x = sample_covariates(spec, spec.n, np.random.default_rng(0))
    for j in (4, 8, 9):
        assert set(np.unique(x[:, j])) == {-1.0, 0.0, 1.0}
    cont = [0, 1, 2, 3, 5, 6, 7]
    corr = np.corrcoef(x[:, cont].T)
    assert corr[0, 1] == pytest.approx(0.5, abs=0.03)
    assert corr[0, 2] == pytest.approx(0.25, abs=0.03)
    assert corr[3, 4] == pytest.approx(0.5, abs=0.03)  # columns 3 and 5 are adjacent continuous ones


def test_logistic_treatment_rate():
    spec = ScenarioSpec(n=20_000, p=5, treatment="logistic", seed=6)
    d = generate(spec, 0)
    eta = d.x @ np.array([0.2, 0.2, -0.4, 0.0, 0.0])
    assert d.a.mean() == pytest.approx(np.mean(1 / (1 + np.exp(-eta))), abs=0.015)


def test_support_metrics():
    b0 = np.array([1.0, -1.0, 0.5, 0.0, 0.0])
    assert support_metrics(b0, b0) == (0.0, 0.0, 0, 0)
    bh = np.array([1.0, -1.0, 0.0, 0.2, 0.0])
    l1, l2, fn, fp = support_metrics(bh, b0)
    assert (fn, fp) == (1, 1)
    assert l1 == pytest.approx(0.7) and l2 == pytest.approx(math.sqrt(0.29))
    with pytest.raises(LengthMismatch):
        support_metrics(bh[:3], b0)


def test_value_estimate():
    d = Dataset(np.arange(8.0).reshape(4, 2) ** 1.5, [0, 1, 1, 0], [1.0, 2.0, 3.0, 4.0])
    assert value_estimate(d, d.a) == pytest.approx(2.5)
    assert value_estimate(d, np.array([1.0, 1.0, 0.0, 0.0])) == pytest.approx(3.0)
    with pytest.raises(NoMatches):
        value_estimate(d, 1 - d.a)
    with pytest.raises(LengthMismatch):
        value_estimate(d, np.ones(3))


def test_match_ratio_rules():
    spec = ScenarioSpec(n=100, p=6)
    x = sample_covariates(spec, 5000, np.random.default_rng(1))
    truth = optimal_rule(spec, x)
    assert match_ratio(truth, truth) == 1.0
    assert match_ratio(1 - truth, truth) == 0.0
    other = (x[:, 0] > 0).astype(float)
    assert match_ratio(other, truth) + match_ratio(1 - other, truth) == pytest.approx(1.0)


def test_evaluate_match_ratio_with_true_index():
    spec = ScenarioSpec(n=400, p=6, seed=9)
    d = generate(spec, 0)
    yt = 2 * (2 * d.a - 1) * d.y
    mr = evaluate_match_ratio(spec, spec.beta, d.x, yt, eval_n=2000, seed=1)
    assert 0.85 <= mr <= 1.0
    assert mr == evaluate_match_ratio(spec, spec.beta, d.x, yt, eval_n=2000, seed=1)
    with pytest.raises(SimulationError):
        evaluate_match_ratio(spec, spec.beta, d.x, yt, eval_n=0)


def records():
    return [{"rep": 2, "l1": 1.0, "l2": 0.5, "fn": 0, "fp": 3, "value": 3.0, "match_ratio": 0.9,
             "eta25_G6_reject": 1, "eta25_cover2": 1},
            {"rep": 0, "l1": 3.0, "l2": 0.7, "fn": 1, "fp": 5, "value": 3.5, "match_ratio": 0.8,
             "eta25_G6_reject": 0, "eta25_cover2": 1},
            {"rep": 1, "error": "NoMatches", "message": "x"}]


def test_aggregate_order_independent():
    a = aggregate(records(), 3.423)
    b = aggregate(records()[::-1], 3.423)
    assert a.summary() == b.summary()
    assert (a.reps, a.failures) == (2, 1)
    assert a.l1_mean == 2.0 and a.l1_se == pytest.approx(1 / math.sqrt(2))
    assert a.rejection_rate == {"eta25_G6": 0.5} and a.coverage == {"eta25_cover2": 1.0}
    assert a.value_bias_mean == pytest.approx(3.25 - 3.423)
    assert a.value_abs_error_mean == pytest.approx((0.423 + 0.077) / 2)
    assert a.match_ratio_mean == pytest.approx(0.85)
    one = aggregate(records()[:1])
    assert one.l2_se == 0.0 and one.fp_se == 0.0


def test_small_campaign_and_report(tmp_path):
    spec = ScenarioSpec(n=80, p=8, seed=5)
    cfg = EstimatorConfig(grid_num=3)
    camp = CampaignConfig(groups=((6, 7),), draws=100, coverage_coords=(2,), value=True, eval_n=500)
    rep = run_monte_carlo(spec, 2, cfg, camp)
    again = run_monte_carlo(spec, 2, cfg, camp, rep_order=[1, 0])
    assert rep.reps + rep.failures == 2
    assert rep.records == again.records
    csv_path, json_path = write_report(rep, spec, tmp_path, include_time=False)
    payload = json.loads(open(json_path).read())
    assert payload["scenario"]["n"] == 80 and len(payload["records"]) == rep.reps
    assert "wall_time" not in open(csv_path).readline()
    with pytest.raises(SimulationError):
        run_monte_carlo(spec, 0)
