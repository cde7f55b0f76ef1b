"""Command-line interface.

Subcommands ``fit``, ``infer``, ``test-group``, ``value`` and ``simulate``.
JSON is the canonical output; run-specific details (timestamp, version,
backend) live in a ``metadata`` block so the rest of the document is
byte-identical across runs with the same arguments and seed.

Group indices are 1-based covariate positions. Position ``j`` is the
coefficient ``beta_j``; position 1 carries the pinned coefficient and cannot be
tested.

Exit codes: 0 success, 1 usage error, 2 numeric failure (a JSON error object
is written to stderr).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from ._backend import BACKEND
from .bootstrap import GroupTestSpec, group_test
from .data import RANDOMIZED, add_interactions, load_csv, modify_response, standardize
from .debias import DEFAULT_ETA_MULT, infer
from .errors import HonestOTRError
from .estimator import EstimatorConfig, fit, fit_cv
from .propensity import obs_pipeline
from .simulation import (DESIGNS, TREAT_LOGISTIC, TREAT_RANDOMIZED, CampaignConfig,
                         ScenarioSpec, run_monte_carlo, value_estimate, write_report)
from .smoother import bandwidth, loo_smooth

SEED_ENV = "HONEST_OTR_SEED"
DEFAULT_GROUPS = "6,7,8,9;2,6,7,8,9"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- argument types ----------------------------------------------------------

def _positive_float(text):
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _unit_interval(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return v


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals or not all(v > 0 and math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive numbers, got {text!r}")
    return vals


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty index list")
    return vals


def _group_sets(text):
    if text.strip().lower() == "none":
        return []
    return [tuple(_int_list(part)) for part in text.split(";") if part.strip()]


def _gamma0(text):
    return text if text == "auto" else _positive_float(text)


# -- parser ------------------------------------------------------------------

def _data_args(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", required=True, help="input CSV with a header row")
    g.add_argument("--outcome", default="y", help="outcome column (default: %(default)s)")
    g.add_argument("--treatment", default="a", help="0/1 treatment column (default: %(default)s)")
    g.add_argument("--covariates", default=None,
                   help="comma-separated names or glob patterns; the first is the "
                        "pinned-coefficient covariate (default: all other columns)")
    g.add_argument("--standardize", action="store_true",
                   help="scale covariates to mean 0, sample variance 1 (default: off)")
    g.add_argument("--interactions", choices=("none", "standardize-first", "interact-first"),
                   default="none",
                   help="append all two-way covariate products, standardizing before or "
                        "after forming them (default: %(default)s)")


def _estimator_args(p):
    g = p.add_argument_group("estimator")
    g.add_argument("--lambda", dest="lam", type=_positive_float, default=None,
                   help="fixed penalty; skips cross-validation (default: cross-validate)")
    g.add_argument("--lambda-grid", type=_float_list, default=None,
                   help="comma-separated candidate penalties for CV (default: automatic grid)")
    g.add_argument("--grid-num", type=_positive_int, default=10,
                   help="automatic grid size (default: %(default)s)")
    g.add_argument("--grid-lo", type=_positive_float, default=0.2,
                   help="automatic grid low end, as a multiple of the start score's "
                        "max-norm (default: %(default)s)")
    g.add_argument("--grid-hi", type=_positive_float, default=5.0,
                   help="automatic grid high end, same units (default: %(default)s)")
    g.add_argument("--rho", type=_positive_float, default=10.0,
                   help="L1 budget for the free coefficients (default: %(default)s)")
    g.add_argument("--gamma0", type=_gamma0, default="auto",
                   help="initial step-size parameter or 'auto' (default: %(default)s)")
    g.add_argument("--gamma0-scale", type=_positive_float, default=EstimatorConfig.gamma0_scale,
                   help="multiplier on the automatic gamma0 (default: %(default)s)")
    g.add_argument("--max-iter", type=_positive_int, default=200,
                   help="iteration cap (default: %(default)s)")
    g.add_argument("--rel-tol", type=_positive_float, default=0.01,
                   help="relative coefficient-change tolerance (default: %(default)s)")
    g.add_argument("--folds", type=_positive_int, default=5,
                   help="cross-validation folds (default: %(default)s)")
    g.add_argument("--threshold-convention", choices=("exact", "paper"), default="exact",
                   help="soft-threshold at lambda/gamma ('exact') or at lambda ('paper') "
                        "(default: %(default)s)")
    g.add_argument("--cv-mode", choices=("out_of_fold", "in_sample"), default="out_of_fold",
                   help="cross-validation error definition (default: %(default)s)")
    g.add_argument("--observational", action="store_true",
                   help="estimate propensities by L1 logistic regression and use "
                        "4(A - pi)Y (default: off, randomized 2(2A - 1)Y)")
    g.add_argument("--propensity-lambda", type=_nonneg_float, default=None,
                   help="propensity penalty (default: 5-fold CV on deviance)")


def _common_args(p):
    p.add_argument("--seed", type=int, default=0,
                   help=f"base seed; the {SEED_ENV} environment variable overrides it "
                        "(default: %(default)s)")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker cap (default: available cores, %(default)s)")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="output format (default: %(default)s)")
    p.add_argument("--out", default="-", help="output path, '-' for stdout (default: %(default)s)")


def _inference_args(p):
    g = p.add_argument_group("inference")
    g.add_argument("--alpha", type=_unit_interval, default=0.05,
                   help="level (default: %(default)s)")
    g.add_argument("--eta-mult", type=_positive_float, default=DEFAULT_ETA_MULT,
                   help="Dantzig tolerance as a multiple of the bandwidth (default: %(default)s)")
    g.add_argument("--eta", type=_positive_float, default=None,
                   help="absolute Dantzig tolerance; overrides --eta-mult (default: unset)")


def build_parser():
    parser = _Parser(prog="honest-otr",
                     description="High-dimensional single-index treatment regimes with "
                                 "debiased inference.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit the penalized index coefficient")
    _data_args(p)
    _estimator_args(p)
    _common_args(p)

    p = sub.add_parser("infer", help="debiased estimates and marginal confidence intervals")
    _data_args(p)
    _estimator_args(p)
    _inference_args(p)
    _common_args(p)

    p = sub.add_parser("test-group", help="bootstrap test that a coefficient group is zero")
    _data_args(p)
    _estimator_args(p)
    _inference_args(p)
    p.add_argument("--group", type=_int_list, action="append", required=True,
                   help="1-based covariate positions, e.g. 6,7,8,9; repeat for several groups")
    p.add_argument("--draws", type=_positive_int, default=1000,
                   help="bootstrap draws B (default: %(default)s)")
    _common_args(p)

    p = sub.add_parser("value", help="estimated value of the fitted treatment rule")
    _data_args(p)
    _estimator_args(p)
    _common_args(p)

    p = sub.add_parser("simulate", help="Monte Carlo campaign on a simulation design")
    p.add_argument("--design", choices=DESIGNS, default="gaussian_iid",
                   help="covariate and outcome design (default: %(default)s)")
    p.add_argument("--n", type=_positive_int, default=300, help="sample size (default: %(default)s)")
    p.add_argument("--p", type=_positive_int, default=200, help="covariates (default: %(default)s)")
    p.add_argument("--reps", type=_positive_int, default=100,
                   help="replicates (default: %(default)s)")
    p.add_argument("--treatment-model", choices=(TREAT_RANDOMIZED, TREAT_LOGISTIC),
                   default=TREAT_RANDOMIZED,
                   help="treatment assignment mechanism (default: %(default)s)")
    p.add_argument("--groups", type=_group_sets, default=DEFAULT_GROUPS,
                   help="semicolon-separated groups to test; 'none' disables "
                        "(default: %(default)s)")
    p.add_argument("--coverage", type=_int_list, default=[2],
                   help="coefficient positions whose interval coverage is recorded "
                        "(default: 2)")
    p.add_argument("--draws", type=_positive_int, default=500,
                   help="bootstrap draws B (default: %(default)s)")
    p.add_argument("--alpha", type=_unit_interval, default=0.05,
                   help="level (default: %(default)s)")
    p.add_argument("--eta-mults", type=_float_list, default=[DEFAULT_ETA_MULT],
                   help="comma-separated Dantzig tolerance multipliers (default: 25)")
    p.add_argument("--value", action="store_true",
                   help="also record value estimates and match ratios (default: off)")
    p.add_argument("--no-inference", action="store_true",
                   help="skip debiasing and group tests (default: off)")
    p.add_argument("--out-dir", default="results", help="report directory (default: %(default)s)")
    _estimator_args(p)
    _common_args(p)
    return parser


# -- helpers -----------------------------------------------------------------

def _seed(args):
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return args.seed
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")


def _config(args, seed):
    return EstimatorConfig(lam=args.lam or 1.0, rho=args.rho, gamma0=args.gamma0,
                           gamma0_scale=args.gamma0_scale, max_iter=args.max_iter,
                           rel_tol=args.rel_tol, cv_folds=args.folds, seed=seed,
                           threshold_convention=args.threshold_convention,
                           cv_mode=args.cv_mode, grid_num=args.grid_num,
                           grid_lo=args.grid_lo, grid_hi=args.grid_hi)


def _load(args):
    if not os.path.exists(args.data):
        raise UsageError(f"data file {args.data!r} not found")
    d = load_csv(args.data, args.outcome, args.treatment, args.covariates)
    if args.interactions == "standardize-first":
        d = add_interactions(standardize(d))
    elif args.interactions == "interact-first":
        d = standardize(add_interactions(d))
    elif args.standardize:
        d = standardize(d)
    return d


def _fit(args, d, cfg):
    """Returns ``(fit_result, modified_response, extras)``."""
    extras = {}
    cv = args.lam is None
    if args.observational:
        ob = obs_pipeline(d, args.propensity_lambda, cfg, grid=args.lambda_grid, cv=cv)
        extras["propensity"] = {"lambda": ob.propensity.lambda_p,
                                "coefficients": ob.propensity.xi.tolist(),
                                "overlap_warning": ob.overlap_warning}
        return ob.fit, ob.ytilde, extras
    yt = modify_response(d, RANDOMIZED)
    res = fit_cv(d, yt, cfg, args.lambda_grid) if cv else fit(d, yt, cfg)
    return res, yt, extras


def _names(d):
    return list(d.column_names) if d.column_names else [f"x{j + 1}" for j in range(d.p)]


def _fit_payload(res, d):
    out = {"beta": res.beta.tolist(), "covariates": _names(d), "lambda": res.lambda_used,
           "iterations": res.iterations, "converged": res.converged,
           "bandwidth": res.bandwidth, "gamma0": res.gamma0,
           "nonzero": int(np.count_nonzero(res.beta))}
    if res.cv_curve is not None:
        out["cv_curve"] = [{"lambda": k, "cv_error": v} for k, v in sorted(res.cv_curve.items())]
    return out


def _infer(args, res, d, yt):
    return infer(res, d, yt, alpha=args.alpha, eta=args.eta, eta_mult=args.eta_mult,
                 workers=args.threads)


def _ci_rows(inf, names):
    se = np.sqrt(np.maximum(inf.sigma_diag, 0.0) / inf.n)
    rows = []
    for k in range(inf.beta_tilde.size):
        rows.append({"position": k + 2, "covariate": names[k + 1],
                     "beta_hat": float(inf.beta_hat[k + 1]),
                     "beta_tilde": float(inf.beta_tilde[k]), "se": float(se[k]),
                     "lower": float(inf.intervals[k, 0]), "upper": float(inf.intervals[k, 1])})
    return rows


def _check_groups(groups, p):
    for g in groups:
        bad = [j for j in g if not 2 <= j <= p]
        if bad:
            raise UsageError(f"group positions {bad} outside 2..{p}; position 1 carries the "
                             "pinned coefficient")
        if len(set(g)) != len(g):
            raise UsageError(f"duplicate positions in group {list(g)}")


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _document(command, args, seed, result):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out", "threads")}
    config["seed"] = seed
    return {"command": command, "config": _clean(config), "result": _clean(result),
            "metadata": {"version": __version__, "backend": BACKEND,
                         "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}}


def _emit(args, doc, table=None):
    if args.format == "csv":
        rows = table if table is not None else [
            {k: v for k, v in doc["result"].items() if not isinstance(v, (list, dict))}]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in _clean(r).items()})
        text = buf.getvalue()
    else:
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)


# -- commands ----------------------------------------------------------------

def _cmd_fit(args, seed):
    d = _load(args)
    res, _, extras = _fit(args, d, _config(args, seed))
    result = {**_fit_payload(res, d), **extras}
    table = [{"position": j + 1, "covariate": nm, "beta": float(b)}
             for j, (nm, b) in enumerate(zip(_names(d), res.beta))]
    _emit(args, _document("fit", args, seed, result), table)


def _cmd_infer(args, seed):
    d = _load(args)
    res, yt, extras = _fit(args, d, _config(args, seed))
    inf = _infer(args, res, d, yt)
    rows = _ci_rows(inf, _names(d))
    result = {"fit": _fit_payload(res, d), "alpha": args.alpha, "eta": inf.nodewise.eta,
              "coefficients": rows, **extras}
    _emit(args, _document("infer", args, seed, result), rows)


def _cmd_test_group(args, seed):
    d = _load(args)
    _check_groups(args.group, d.p)
    res, yt, extras = _fit(args, d, _config(args, seed))
    inf = _infer(args, res, d, yt)
    tests = []
    for g in args.group:
        gt = group_test(inf, GroupTestSpec(tuple(g), args.alpha, args.draws, seed))
        tests.append({"group": list(gt.group), "statistic": gt.statistic, "c_star": gt.c_star,
                      "p_value": gt.p_value, "reject": gt.reject, "draws": args.draws})
    result = {"fit": _fit_payload(res, d), "alpha": args.alpha, "eta": inf.nodewise.eta,
              "tests": tests, **extras}
    table = [{**t, "group": " ".join(str(j) for j in t["group"])} for t in tests]
    _emit(args, _document("test-group", args, seed, result), table)


def _cmd_value(args, seed):
    d = _load(args)
    res, yt, extras = _fit(args, d, _config(args, seed))
    u = d.x @ res.beta
    sm = loo_smooth(u, yt.values, d.x, bandwidth(u))
    rule = (sm.ghat > 0).astype(float)
    v = value_estimate(d, rule)
    result = {"value": v, "matched": int(np.sum(d.a == rule)), "n": d.n,
              "recommended_treated": int(rule.sum()), "fit": _fit_payload(res, d), **extras}
    _emit(args, _document("value", args, seed, result))


def _cmd_simulate(args, seed):
    if args.design == "ar_discrete" and args.p < 6:
        raise UsageError("ar_discrete needs --p >= 6")
    groups = args.groups
    _check_groups(groups, args.p)
    for j in args.coverage:
        if not 2 <= j <= args.p:
            raise UsageError(f"coverage position {j} outside 2..{args.p}")
    spec = ScenarioSpec(design=args.design, n=args.n, p=args.p, seed=seed,
                        treatment=args.treatment_model)
    camp = CampaignConfig(groups=() if args.no_inference else tuple(groups),
                          alpha=args.alpha, draws=args.draws,
                          eta_mults=tuple(args.eta_mults),
                          coverage_coords=() if args.no_inference else tuple(args.coverage),
                          value=args.value, observational=args.observational,
                          propensity_lambda=args.propensity_lambda)
    report = run_monte_carlo(spec, args.reps, _config(args, seed), camp, workers=args.threads)
    csv_path, json_path = write_report(report, spec, args.out_dir)
    summary = report.summary()
    summary.pop("wall_time")
    result = {"scenario": asdict(spec), "summary": summary,
              "files": {"csv": csv_path, "json": json_path}}
    doc = _document("simulate", args, seed, result)
    doc["metadata"]["wall_time"] = report.wall_time
    _emit(args, doc)


COMMANDS = {"fit": _cmd_fit, "infer": _cmd_infer, "test-group": _cmd_test_group,
            "value": _cmd_value, "simulate": _cmd_simulate}


def run(argv=None):
    """Parse ``argv`` and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        seed = _seed(args)
        COMMANDS[args.command](args, seed)
    except UsageError as exc:
        sys.stderr.write(f"honest-otr: error: {exc}\n")
        return 1
    except HonestOTRError as exc:
        err = {"error": {"code": exc.code, "message": str(exc)}}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
