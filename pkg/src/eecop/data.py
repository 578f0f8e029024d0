"""Core data containers and probability-integral-transform plumbing.

A :class:`Sample` holds the raw observations, split into a response block
``y`` (n x q) and a covariate block ``x`` (n x p).  Marginal models map each
column to the uniform scale, producing a :class:`PseudoSample`; copulas and
weight functions operate on that scale.  All containers are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError

# Pseudo-observations are clamped into [PIT_EPS, 1 - PIT_EPS].  The model
# assumes absolutely continuous data; the clamp only guards the Gaussian
# quantile function against overflow at the sample extremes.
PIT_EPS = 1e-10


def _as_matrix(a, name: str) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    if out.ndim != 2:
        raise DataError("data.bad_shape", f"{name} must be a vector or matrix")
    return out


@dataclass(frozen=True)
class Sample:
    """Observed data: responses ``y`` (n x q) and covariates ``x`` (n x p).

    ``p = 0`` is allowed and means unconditional estimation (the weight
    function is identically one).
    """

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = _as_matrix(self.y, "y")
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if x.size else x.reshape(len(y), 0)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        if self.y.shape[0] != self.x.shape[0]:
            raise DataError("data.length_mismatch",
                            "y and x must have the same number of rows")
        if self.n < 2:
            raise DataError("data.too_few_rows", "need at least 2 observations")
        if self.q < 1:
            raise DataError("data.no_response", "need at least one response column")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.x))):
            raise DataError("data.non_finite", "all entries must be finite")
        self.y.setflags(write=False)
        self.x.setflags(write=False)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.y.shape[1]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def columns(self) -> np.ndarray:
        """All columns as one n x (q + p) matrix, responses first."""
        return np.hstack([self.y, self.x])


@dataclass(frozen=True)
class PseudoSample:
    """Probability-integral-transformed data on (0, 1)^(q+p)."""

    u: np.ndarray

    def __post_init__(self):
        u = _as_matrix(self.u, "u")
        object.__setattr__(self, "u", u)
        if not np.all((u > 0.0) & (u < 1.0)):
            raise DataError("data.pseudo_out_of_range",
                            "pseudo-observations must lie strictly inside (0, 1)")
        self.u.setflags(write=False)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def d(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class IndexGrid:
    """Sorted index levels t for quantile/expectile paths.

    Families without an index (mean, exponential family, IV) carry the
    singleton grid ``(0.5,)``; the level is ignored by their identifying
    functions.
    """

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) == 0:
            raise DataError("data.empty_grid", "index grid cannot be empty")
        if any(not (0.0 < v < 1.0) for v in vals):
            raise DataError("data.grid_out_of_range",
                            "index levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise DataError("data.grid_not_increasing",
                            "index levels must be strictly increasing")

    @classmethod
    def unindexed(cls) -> "IndexGrid":
        return cls((0.5,))

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class EstimateResult:
    """Solved path over the index grid, plus optional bootstrap output.

    ``theta`` has shape (|T|,) for scalar families and (|T|, K) for the IV
    family.  ``boot_draws`` (when present) has one row per requested
    replicate; failed replicates are NaN rows.
    """

    x0: np.ndarray
    t_grid: IndexGrid
    theta: np.ndarray
    derivatives: list
    diagnostics: dict = field(default_factory=dict)
    boot_draws: np.ndarray | None = None
    bands: "object | None" = None


def load_sample(path, response_cols: Sequence[str],
                covariate_cols: Sequence[str] = ()) -> Sample:
    """Read a CSV file (header row, '.' decimal point) into a :class:`Sample`.

    Parameters
    ----------
    path : str or Path
        CSV file with a header naming every requested column.
    response_cols, covariate_cols : sequence of str
        Column names, in the order they should appear in the blocks.

    Rows with a missing or non-numeric cell in any requested column are an
    error (missing data are rejected, not imputed).
    """
    response_cols = list(response_cols)
    covariate_cols = list(covariate_cols)
    if not response_cols:
        raise DataError("data.no_response", "need at least one response column")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("data.empty_file", f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        index = {}
        for name in response_cols + covariate_cols:
            if name not in header:
                raise DataError("data.missing_column",
                                f"{path}: column {name!r} not found in header")
            index[name] = header.index(name)
        wanted = response_cols + covariate_cols
        rows = []
        for i, row in enumerate(reader):
            if not row or all(c.strip() == "" for c in row):
                continue  # skip blank lines
            vals = []
            for name in wanted:
                j = index[name]
                cell = row[j].strip() if j < len(row) else ""
                if cell == "":
                    raise DataError(
                        "data.missing_cell",
                        f"{path}: missing value in column {name!r} at data row {i}")
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        "data.non_numeric",
                        f"{path}: non-numeric value {cell!r} in column {name!r} "
                        f"at data row {i}") from None
            rows.append(vals)
    if len(rows) < 2:
        raise DataError("data.too_few_rows",
                        f"{path}: need at least 2 data rows, found {len(rows)}")
    mat = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise DataError("data.non_finite", f"{path}: non-finite value in data")
    nq = len(response_cols)
    return Sample(y=mat[:, :nq], x=mat[:, nq:])


def save_sample(sample: Sample, path, response_cols: Sequence[str] | None = None,
                covariate_cols: Sequence[str] | None = None) -> None:
    """Write a sample back to CSV with shortest round-trip float formatting."""
    if response_cols is None:
        response_cols = [f"y{j + 1}" for j in range(sample.q)]
    if covariate_cols is None:
        covariate_cols = [f"x{j + 1}" for j in range(sample.p)]
    header = list(response_cols) + list(covariate_cols)
    if len(header) != sample.q + sample.p:
        raise DataError("data.bad_header", "column name count mismatch")
    mat = sample.columns()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in mat:
            writer.writerow([repr(float(v)) for v in row])


def pit(sample: Sample, margins: Sequence) -> PseudoSample:
    """Map each column through its marginal CDF (clamped into the open cube).

    ``margins`` must contain one fitted marginal model per column of
    ``(y, x)``, responses first.
    """
    cols = sample.columns()
    if len(margins) != cols.shape[1]:
        raise DataError("data.margin_count",
                        f"need {cols.shape[1]} margins, got {len(margins)}")
    u = np.empty_like(cols)
    for j, margin in enumerate(margins):
        u[:, j] = margin.cdf(cols[:, j])
    u = np.clip(u, PIT_EPS, 1.0 - PIT_EPS)
    return PseudoSample(u=u)


def rank_pseudo_sample(sample: Sample) -> PseudoSample:
    """Rescaled-rank pseudo-observations: rank / (n + 1) per column.

    Invariant under any strictly increasing re-coding of a column; offered as
    the margin-free alternative to :func:`pit` for copula fitting.
    """
    cols = sample.columns()
    n = cols.shape[0]
    u = np.empty_like(cols)
    for j in range(cols.shape[1]):
        order = np.argsort(cols[:, j], kind="stable")
        ranks = np.empty(n)
        ranks[order] = np.arange(1, n + 1)
        u[:, j] = ranks / (n + 1.0)
    return PseudoSample(u=u)
