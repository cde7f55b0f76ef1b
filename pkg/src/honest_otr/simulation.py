"""Simulation designs, rule scoring and seeded Monte Carlo campaigns."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .bootstrap import GroupTestSpec, group_test
from .data import RANDOMIZED, Dataset, modify_response
from .debias import DEFAULT_ETA_MULT, infer
from .errors import HonestOTRError, LengthMismatch, NoMatches, SimulationError, UnknownDesign
from .estimator import EstimatorConfig, fit_cv
from .propensity import obs_pipeline
from .smoother import bandwidth, loo_smooth, nw_predict

log = logging.getLogger(__name__)

GAUSSIAN_IID = "gaussian_iid"
AR_DISCRETE = "ar_discrete"
UNIFORM_NONINDEX = "uniform_nonindex"
DESIGNS = (GAUSSIAN_IID, AR_DISCRETE, UNIFORM_NONINDEX)

LOGISTIC20 = "logistic20"
NONINDEX_RING = "nonindex_ring"
LINEAR = "linear"
LINKS = (LOGISTIC20, NONINDEX_RING, LINEAR)

TREAT_RANDOMIZED = "randomized"
TREAT_LOGISTIC = "logistic"

OPTIMAL_VALUE = {GAUSSIAN_IID: 3.423, UNIFORM_NONINDEX: 2.443}

_BETA0 = {
    GAUSSIAN_IID: (1.0, -1.0, -0.5, 0.4, -0.3),
    AR_DISCRETE: (1.0, -1.0, -0.8, 0.6, -0.5),
    UNIFORM_NONINDEX: (1.0,),
}
_ETA = {
    GAUSSIAN_IID: (0.5, 0.5, -0.5, -0.5),
    AR_DISCRETE: (0.5, 0.5, -0.5, -0.5),
    UNIFORM_NONINDEX: (2.0, 1.0, 0.5),
}
_LINK = {GAUSSIAN_IID: LOGISTIC20, AR_DISCRETE: LOGISTIC20, UNIFORM_NONINDEX: NONINDEX_RING}
XI_DEFAULT = (0.2, 0.2, -0.4)


def _padded(values, p):
    out = np.zeros(p)
    k = min(len(values), p)
    out[:k] = values[:k]
    return out


def f0_logistic20(u):
    """``20 (1 / (1 + e^-u) - 0.5)``, written as ``10 tanh(u / 2)`` for accuracy."""
    return 10.0 * np.tanh(0.5 * np.asarray(u, dtype=float))


def f0_ring(x):
    """Non-index contrast ``20 (1 - x1^2 - x2^2)(x1^2 + x2^2 - 0.36)``."""
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    return 20.0 * (1.0 - r2) * (r2 - 0.36)


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation scenario.

    ``beta0``, ``eta_main`` and ``link`` default to the design's values.
    ``treatment`` is ``"randomized"`` (``A ~ Bernoulli(1/2)``) or
    ``"logistic"`` with coefficients ``xi``.
    """

    design: str = GAUSSIAN_IID
    n: int = 300
    p: int = 200
    beta0: Optional[tuple] = None
    eta_main: Optional[tuple] = None
    link: Optional[str] = None
    treatment: str = TREAT_RANDOMIZED
    xi: tuple = XI_DEFAULT
    seed: int = 0

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise UnknownDesign(f"unknown design {self.design!r}; choose from {DESIGNS}")
        if self.n < 1 or self.p < 1:
            raise SimulationError("n and p must be positive")
        if self.design == AR_DISCRETE and self.p < 6:
            raise SimulationError("ar_discrete needs p >= 6")
        if self.design == UNIFORM_NONINDEX and self.p < 2:
            raise SimulationError("uniform_nonindex needs p >= 2")
        b = self.beta0 if self.beta0 is not None else _padded(_BETA0[self.design], self.p)
        e = self.eta_main if self.eta_main is not None else _padded(_ETA[self.design], self.p)
        b = tuple(float(v) for v in b)
        e = tuple(float(v) for v in e)
        if len(b) != self.p or len(e) != self.p:
            raise LengthMismatch("beta0 and eta_main must have length p")
        if b[0] != 1.0:
            raise SimulationError("beta0 must have first entry 1")
        link = self.link or _LINK[self.design]
        if link not in LINKS:
            raise SimulationError(f"unknown link {link!r}")
        if self.treatment not in (TREAT_RANDOMIZED, TREAT_LOGISTIC):
            raise SimulationError(f"unknown treatment mechanism {self.treatment!r}")
        object.__setattr__(self, "beta0", b)
        object.__setattr__(self, "eta_main", e)
        object.__setattr__(self, "link", link)
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))

    @property
    def beta(self):
        return np.array(self.beta0)

    def tag(self):
        return f"{self.design}_n{self.n}_p{self.p}_seed{self.seed}"


def _rng(seed, rep):
    return np.random.default_rng(np.random.SeedSequence([seed, rep]))


def _ar_cholesky(q, r=0.5):
    idx = np.arange(q)
    return np.linalg.cholesky(r ** np.abs(idx[:, None] - idx[None, :]))


def sample_covariates(spec: ScenarioSpec, n, rng):
    p = spec.p
    if spec.design == GAUSSIAN_IID:
        return rng.standard_normal((n, p))
    if spec.design == UNIFORM_NONINDEX:
        return rng.uniform(-1.0, 1.0, (n, p))
    disc = np.array([4, p - 2, p - 1])
    cont = np.setdiff1d(np.arange(p), disc)
    x = np.empty((n, p))
    x[:, cont] = rng.standard_normal((n, cont.size)) @ _ar_cholesky(cont.size).T
    x[:, disc] = rng.integers(-1, 2, (n, 3)).astype(float)
    return x


def contrast(spec: ScenarioSpec, x):
    """True treatment contrast ``f0`` at the rows of ``x``."""
    if spec.link == NONINDEX_RING:
        return f0_ring(x)
    u = x @ spec.beta
    return f0_logistic20(u) if spec.link == LOGISTIC20 else u


def optimal_rule(spec: ScenarioSpec, x):
    return (contrast(spec, x) > 0).astype(float)


def generate(spec: ScenarioSpec, rep: int = 0) -> Dataset:
    """Draw replicate ``rep``; the stream is keyed by ``(spec.seed, rep)``."""
    rng = _rng(spec.seed, rep)
    n = spec.n
    x = sample_covariates(spec, n, rng)
    eta = np.array(spec.eta_main)
    main = 1.0 + x @ eta if spec.design == UNIFORM_NONINDEX else (x @ eta) ** 2
    if spec.treatment == TREAT_RANDOMIZED:
        prob = np.full(n, 0.5)
    else:
        prob = 1.0 / (1.0 + np.exp(-(x @ _padded(spec.xi, spec.p))))
    a = (rng.random(n) < prob).astype(float)
    y = main + (a - 0.5) * contrast(spec, x) + rng.standard_normal(n)
    return Dataset(x, a, y)


def support_metrics(beta_hat, beta0):
    """``(l1, l2, fn, fp)`` of an estimate against the truth; zero means exactly 0."""
    bh = np.asarray(beta_hat, dtype=float)
    b0 = np.asarray(beta0, dtype=float)
    if bh.shape != b0.shape:
        raise LengthMismatch(f"estimate has shape {bh.shape}, truth {b0.shape}")
    diff = bh - b0
    fn = int(np.sum((b0 != 0) & (bh == 0)))
    fp = int(np.sum((b0 == 0) & (bh != 0)))
    return float(np.abs(diff).sum()), float(np.sqrt(diff @ diff)), fn, fp


def value_estimate(d: Dataset, rule) -> float:
    """Mean outcome over subjects whose received treatment agrees with ``rule``."""
    rule = np.asarray(rule, dtype=float)
    if rule.shape != d.a.shape:
        raise LengthMismatch("rule must have one decision per subject")
    hit = d.a == rule
    if not hit.any():
        raise NoMatches("no subject received the treatment the rule recommends")
    return float(d.y[hit].mean())


def match_ratio(estimated, truth) -> float:
    """Fraction of points where two binary rules agree."""
    e = np.asarray(estimated)
    t = np.asarray(truth)
    if e.shape != t.shape:
        raise LengthMismatch("rules must be evaluated on the same sample")
    return float(np.count_nonzero(e == t) / e.size)


def estimated_rule(beta_hat, x_train, ytilde_train, x_new):
    """``1(G(x'beta | beta) > 0)`` with the training-sample smoother."""
    u = x_train @ beta_hat
    g = nw_predict(x_new @ beta_hat, u, ytilde_train, bandwidth(u))
    return (g > 0).astype(float)


def evaluate_match_ratio(spec: ScenarioSpec, beta_hat, x_train, ytilde_train,
                         eval_n=10_000, seed=0):
    """Match ratio of the fitted rule on a fresh sample of ``eval_n`` covariate rows."""
    if eval_n < 1:
        raise SimulationError("eval_n must be at least 1")
    x_new = sample_covariates(spec, eval_n, _rng(seed, 0xE7A1))
    est = estimated_rule(np.asarray(beta_hat, dtype=float), x_train, ytilde_train, x_new)
    return match_ratio(est, optimal_rule(spec, x_new))


# -- Monte Carlo -------------------------------------------------------------

@dataclass(frozen=True)
class CampaignConfig:
    """What each replicate computes beyond the point estimate."""

    groups: tuple = ()
    alpha: float = 0.05
    draws: int = 500
    eta_mults: tuple = (DEFAULT_ETA_MULT,)
    coverage_coords: tuple = ()
    value: bool = False
    eval_n: int = 10_000
    observational: bool = False
    propensity_lambda: Optional[float] = None


def run_replicate(spec: ScenarioSpec, rep: int, cfg: EstimatorConfig,
                  camp: CampaignConfig = CampaignConfig()):
    """Generate, fit, debias and test one replicate; returns a flat record."""
    d = generate(spec, rep)
    est_cfg = replace(cfg, seed=cfg.seed + rep)
    rec = {"rep": rep}
    if camp.observational:
        ob = obs_pipeline(d, camp.propensity_lambda, est_cfg)
        yt, res = ob.ytilde, ob.fit
        rec["overlap_warning"] = ob.overlap_warning
    else:
        yt = modify_response(d, RANDOMIZED)
        res = fit_cv(d, yt, est_cfg)
    l1, l2, fn, fp = support_metrics(res.beta, spec.beta)
    rec.update(l1=l1, l2=l2, fn=fn, fp=fp, lambda_used=res.lambda_used,
               iterations=res.iterations)
    if camp.value:
        u = d.x @ res.beta
        sm = loo_smooth(u, yt.values, d.x, bandwidth(u))
        rec["value"] = value_estimate(d, (sm.ghat > 0).astype(float))
        rec["match_ratio"] = evaluate_match_ratio(spec, res.beta, d.x, yt.values,
                                                  camp.eval_n, seed=spec.seed * 1_000_003 + rep)
    if camp.groups or camp.coverage_coords:
        coords = sorted({int(j) for g in camp.groups for j in g} | set(camp.coverage_coords))
        for mult in camp.eta_mults:
            inf = infer(res, d, yt, alpha=camp.alpha, eta_mult=mult, coords=coords)
            key = f"eta{mult:g}"
            for g in camp.groups:
                gt = group_test(inf, GroupTestSpec(tuple(g), camp.alpha, camp.draws, seed=rep))
                gname = "G" + "_".join(str(j) for j in g)
                rec[f"{key}_{gname}_reject"] = int(gt.reject)
                rec[f"{key}_{gname}_pvalue"] = gt.p_value
            for j in camp.coverage_coords:
                lo, hi = inf.intervals[j - 2]
                rec[f"{key}_cover{j}"] = int(lo <= spec.beta[j - 1] <= hi)
    return rec


def _safe_replicate(args):
    spec, rep, cfg, camp = args
    try:
        return run_replicate(spec, rep, cfg, camp)
    except HonestOTRError as exc:
        return {"rep": rep, "error": exc.code, "message": str(exc)}


@dataclass
class MonteCarloReport:
    """Aggregates over replicates; ``*_se`` is ``sd / sqrt(reps)`` (population sd)."""

    reps: int
    failures: int
    l1_mean: float
    l1_se: float
    l2_mean: float
    l2_se: float
    fn_mean: float
    fn_se: float
    fp_mean: float
    fp_se: float
    rejection_rate: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)
    value_bias_mean: float = float("nan")
    value_bias_se: float = float("nan")
    value_abs_error_mean: float = float("nan")
    match_ratio_mean: float = float("nan")
    wall_time: float = 0.0
    records: list = field(default_factory=list, repr=False)
    failed: list = field(default_factory=list, repr=False)

    def summary(self):
        out = {k: v for k, v in asdict(self).items() if k not in ("records", "failed")}
        return out


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std() / math.sqrt(v.size))


def aggregate(records: Sequence[dict], optimal_value=None, wall_time=0.0):
    """Combine per-replicate records; the result does not depend on their order."""
    recs = sorted((r for r in records if "error" not in r), key=lambda r: r["rep"])
    failed = sorted((r for r in records if "error" in r), key=lambda r: r["rep"])
    stats = {}
    for name in ("l1", "l2", "fn", "fp"):
        stats[f"{name}_mean"], stats[f"{name}_se"] = _mean_se([r[name] for r in recs])
    keys = sorted({k for r in recs for k in r})
    rej = {k[: -len("_reject")]: _mean_se([r[k] for r in recs if k in r])[0]
           for k in keys if k.endswith("_reject")}
    cov = {k: _mean_se([r[k] for r in recs if k in r])[0] for k in keys if "_cover" in k}
    rep = MonteCarloReport(len(recs), len(failed), rejection_rate=rej, coverage=cov,
                           wall_time=float(wall_time), records=recs, failed=failed, **stats)
    if recs and "value" in recs[0]:
        vals = np.array([r["value"] for r in recs])
        if optimal_value is not None:
            rep.value_bias_mean, rep.value_bias_se = _mean_se(vals - optimal_value)
            rep.value_abs_error_mean = float(np.mean(np.abs(vals - optimal_value)))
        rep.match_ratio_mean = _mean_se([r["match_ratio"] for r in recs])[0]
    return rep


def run_monte_carlo(spec: ScenarioSpec, reps: int, cfg: EstimatorConfig = EstimatorConfig(),
                    camp: CampaignConfig = CampaignConfig(), workers=1, rep_order=None):
    """Run ``reps`` independent replicates and aggregate them.

    Failures inside a replicate are logged with the replicate index and
    counted; the campaign continues. ``workers > 1`` uses a process pool.
    """
    if reps < 1:
        raise SimulationError("reps must be at least 1")
    order = list(range(reps)) if rep_order is None else list(rep_order)
    jobs = [(spec, r, cfg, camp) for r in order]
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_safe_replicate, jobs))
    else:
        records = [_safe_replicate(j) for j in jobs]
    for r in records:
        if "error" in r:
            log.warning("replicate %d failed: %s (%s)", r["rep"], r["error"], r["message"])
    opt = OPTIMAL_VALUE.get(spec.design) if spec.treatment == TREAT_RANDOMIZED else None
    return aggregate(records, opt, time.perf_counter() - t0)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_report(report: MonteCarloReport, spec: ScenarioSpec, out_dir, include_time=True):
    """Write ``<tag>.csv`` (one summary row) and ``<tag>.json`` (all records) to ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, spec.tag())
    summary = report.summary()
    if not include_time:
        summary.pop("wall_time")
    flat = {"design": spec.design, "n": spec.n, "p": spec.p, "seed": spec.seed}
    for k, v in summary.items():
        if isinstance(v, dict):
            flat.update({f"{k}:{kk}": vv for kk, vv in v.items()})
        else:
            flat[k] = v
    with open(base + ".csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(flat))
        w.writeheader()
        w.writerow(_jsonable(flat))
    payload = {"scenario": asdict(spec), "summary": summary,
               "records": report.records, "failed": report.failed}
    with open(base + ".json", "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
    return base + ".csv", base + ".json"
