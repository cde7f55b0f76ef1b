"""Dataset container, CSV ingestion, standardization and the modified response."""

from __future__ import annotations

import csv
import fnmatch
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConstantColumn,
    DataError,
    MissingColumn,
    NonBinaryTreatment,
    NonNumericCell,
    PropensityMissing,
    PropensityOutOfRange,
    TooFewRows,
)

RANDOMIZED = "randomized"
OBSERVATIONAL = "observational"


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Covariates ``x`` (n, p), binary treatment ``a`` and outcome ``y``."""

    x: np.ndarray
    a: np.ndarray
    y: np.ndarray
    column_names: Optional[tuple] = None

    def __post_init__(self):
        x, a, y = _frozen(self.x), _frozen(self.a), _frozen(self.y)
        if x.ndim != 2:
            raise DataError("covariates must be a 2-d array")
        n, p = x.shape
        if n < 2:
            raise TooFewRows(f"need at least 2 rows, got {n}")
        if p < 2:
            raise DataError(f"need at least 2 covariates, got {p}")
        if a.shape != (n,) or y.shape != (n,):
            raise DataError("treatment and outcome must have one entry per row")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise NonNumericCell("non-finite covariate or outcome value")
        if not np.isin(a, (0.0, 1.0)).all():
            raise NonBinaryTreatment("treatment entries must be exactly 0 or 1")
        names = self.column_names
        if names is not None:
            names = tuple(str(c) for c in names)
            if len(names) != p:
                raise DataError("column_names length does not match covariates")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    def subset(self, rows):
        return Dataset(self.x[rows], self.a[rows], self.y[rows], self.column_names)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.y, other.y)
            and self.column_names == other.column_names
        )

    __hash__ = None


@dataclass(frozen=True)
class ModifiedResponse:
    values: np.ndarray
    mode: str = RANDOMIZED
    propensity: Optional[np.ndarray] = field(default=None)


def coefficient(rest):
    """Full index coefficient ``(1, rest)``; the first entry is pinned to 1."""
    rest = np.asarray(rest, dtype=float).ravel()
    return np.concatenate(([1.0], rest))


# -- CSV ---------------------------------------------------------------------

def _resolve_covariates(header, covariates, exclude):
    if covariates is None:
        return [c for c in header if c not in exclude]
    if isinstance(covariates, str):
        covariates = [c.strip() for c in covariates.split(",") if c.strip()]
    cols = []
    for pat in covariates:
        if any(ch in pat for ch in "*?["):
            hits = [c for c in header if fnmatch.fnmatchcase(c, pat) and c not in exclude]
            if not hits:
                raise MissingColumn(f"no column matches pattern {pat!r}")
            cols.extend(h for h in hits if h not in cols)
        elif pat not in header:
            raise MissingColumn(f"column {pat!r} not found")
        elif pat not in cols:
            cols.append(pat)
    return cols


def load_csv(path, outcome="y", treatment="a", covariates=None):
    """Read a headed CSV into a :class:`Dataset`.

    ``covariates`` is a list of names, a comma-separated string, or glob
    patterns such as ``"x*"``; by default every column other than the outcome
    and treatment is a covariate. Row order is preserved.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TooFewRows(f"{path}: empty file") from None
        rows = [r for r in reader if r]

    for col in (outcome, treatment):
        if col not in header:
            raise MissingColumn(f"column {col!r} not found")
    cov = _resolve_covariates(header, covariates, {outcome, treatment})
    if len(rows) < 2:
        raise TooFewRows(f"need at least 2 data rows, got {len(rows)}")

    idx = {c: k for k, c in enumerate(header)}
    wanted = [outcome, treatment] + cov
    vals = np.empty((len(rows), len(wanted)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise NonNumericCell(f"row {i + 2}: expected {len(header)} cells, got {len(row)}")
        for k, c in enumerate(wanted):
            cell = row[idx[c]].strip()
            try:
                vals[i, k] = float(cell)
            except ValueError:
                raise NonNumericCell(f"row {i + 2}, column {c!r}: {cell!r}") from None
            if not np.isfinite(vals[i, k]):
                raise NonNumericCell(f"row {i + 2}, column {c!r}: {cell!r}")
    a = vals[:, 1]
    if not np.isin(a, (0.0, 1.0)).all():
        bad = np.flatnonzero(~np.isin(a, (0.0, 1.0)))[0]
        raise NonBinaryTreatment(f"row {bad + 2}: treatment value {a[bad]!r}")
    return Dataset(vals[:, 2:], a, vals[:, 0], tuple(cov))


def write_csv(d, path, outcome="y", treatment="a"):
    names = d.column_names or tuple(f"x{j + 1}" for j in range(d.p))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([outcome, treatment, *names])
        for i in range(d.n):
            w.writerow(
                [f"{d.y[i]:.17g}", f"{d.a[i]:.17g}"] + [f"{v:.17g}" for v in d.x[i]]
            )


# -- transforms --------------------------------------------------------------

def standardize(d):
    """Center each covariate and scale it to unit sample variance (n - 1 divisor)."""
    x = d.x
    mean = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    for j in np.flatnonzero(~(sd > 0)):
        name = d.column_names[j] if d.column_names else None
        raise ConstantColumn(int(j), name)
    return Dataset((x - mean) / sd, d.a, d.y, d.column_names)


def add_interactions(d, columns: Optional[Sequence[int]] = None):
    """Append all two-way products of the chosen covariate columns."""
    cols = range(d.p) if columns is None else columns
    names = d.column_names or tuple(f"x{j + 1}" for j in range(d.p))
    extra, extra_names = [], []
    for j, k in combinations(cols, 2):
        extra.append(d.x[:, j] * d.x[:, k])
        extra_names.append(f"{names[j]}:{names[k]}")
    if not extra:
        return d
    x = np.column_stack([d.x] + extra)
    return Dataset(x, d.a, d.y, tuple(names) + tuple(extra_names))


def modify_response(d, mode=RANDOMIZED, propensity=None):
    """Modified response whose conditional mean given x is the interaction link.

    Randomized: ``2(2A - 1)Y``. Observational: ``4(A - pi(x))Y`` with the
    supplied propensities, which must lie strictly inside (0, 1).
    """
    if mode == RANDOMIZED:
        return ModifiedResponse(_frozen(2.0 * (2.0 * d.a - 1.0) * d.y), RANDOMIZED)
    if mode != OBSERVATIONAL:
        raise DataError(f"unknown mode {mode!r}")
    if propensity is None:
        raise PropensityMissing("observational mode needs propensity scores")
    pi = np.asarray(propensity, dtype=float)
    if pi.shape != (d.n,):
        raise PropensityMissing(f"propensity must have length {d.n}")
    if not ((pi > 0) & (pi < 1)).all():
        raise PropensityOutOfRange("propensity scores must lie in (0, 1)")
    return ModifiedResponse(_frozen(4.0 * (d.a - pi) * d.y), OBSERVATIONAL, _frozen(pi))
