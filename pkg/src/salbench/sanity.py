"""Meta-evaluation statistics: rank correlations, consistency tables, inter-metric reliability."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import AlignmentError, InvalidArgumentError, UndefinedCorrelationError


class Polarity(Enum):
    HIGHER_BETTER = "higher"
    LOWER_BETTER = "lower"


class SeriesKind(Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True)
class MetricSeries:
    """Per-sample values of one metric configuration, aligned by sample id."""

    metric_id: str
    polarity: Polarity
    values: np.ndarray
    kind: SeriesKind
    sample_ids: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        ids = tuple(self.sample_ids)
        if values.ndim != 1 or values.shape[0] != len(ids):
            raise InvalidArgumentError("values must be 1-D and aligned with sample ids")
        if not np.isfinite(values).all():
            raise InvalidArgumentError("metric series values must be finite")
        if self.kind is SeriesKind.BINARY and not np.isin(values, (0.0, 1.0)).all():
            raise InvalidArgumentError("binary series values must be 0 or 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", ids)


def average_ranks(x: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based), ties sharing their average rank."""
    x = np.asarray(x)
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    sorted_x = x[order]
    boundaries = np.nonzero(np.diff(sorted_x))[0]
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries, [n - 1]))
    tie_rank = (starts + ends) / 2.0 + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(tie_rank, ends - starts + 1)
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise UndefinedCorrelationError("constant input leaves the correlation undefined")
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


def spearman(x, y) -> float:
    """Pearson correlation of average-tie ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise InvalidArgumentError("inputs must be equally long 1-D arrays")
    if x.shape[0] < 3:
        raise InvalidArgumentError("need at least 3 samples")
    if (x == x[0]).all() or (y == y[0]).all():
        raise UndefinedCorrelationError("constant input leaves the rank correlation undefined")
    return _pearson(average_ranks(x), average_ranks(y))


def point_biserial(b, y) -> float:
    """Correlation of a binary split with a continuous variable (population std).

    Equals the Pearson correlation of (b, y); groups with equal means give 0.
    """
    b = np.asarray(b, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if b.ndim != 1 or b.shape != y.shape:
        raise InvalidArgumentError("inputs must be equally long 1-D arrays")
    if b.shape[0] < 3:
        raise InvalidArgumentError("need at least 3 samples")
    if not np.isin(b, (0.0, 1.0)).all():
        raise InvalidArgumentError("first argument must be a binary 0/1 vector")
    n = b.shape[0]
    n1 = int(b.sum())
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedCorrelationError("both classes must be present in the binary vector")
    mean1 = y[b == 1.0].mean()
    mean0 = y[b == 0.0].mean()
    if mean1 == mean0:
        return 0.0
    s_y = y.std()  # population standard deviation
    if s_y == 0.0:
        raise UndefinedCorrelationError("constant continuous input")
    r = (mean1 - mean0) / s_y * math.sqrt(n1 * n0 / (n * n))
    return float(np.clip(r, -1.0, 1.0))


@dataclass(frozen=True)
class CorrelationTable:
    """Symmetric coefficient matrix; NaN marks undefined cells.

    The diagonal stores the trivial self-correlation 1.0 but is rendered as an
    empty/null cell when serialized, matching the usual table convention.
    """

    labels: tuple
    coefficients: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        coeff = np.asarray(self.coefficients, dtype=np.float64)
        n = len(labels)
        if coeff.shape != (n, n):
            raise InvalidArgumentError("coefficient matrix must be square over the labels")
        finite = np.isfinite(coeff)
        if not np.array_equal(finite, finite.T) or not np.allclose(
            coeff[finite & finite.T], coeff.T[finite & finite.T]
        ):
            raise InvalidArgumentError("coefficient matrix must be symmetric")
        if finite.any() and (np.abs(coeff[finite]) > 1.0 + 1e-12).any():
            raise InvalidArgumentError("coefficients must lie in [-1, 1]")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "coefficients", coeff)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("," + ",".join(self.labels) + "\n")
        for i, label in enumerate(self.labels):
            cells = []
            for j in range(len(self.labels)):
                value = self.coefficients[i, j]
                cells.append("" if i == j or not np.isfinite(value) else f"{value:.4f}")
            out.write(label + "," + ",".join(cells) + "\n")
        return out.getvalue()

    def to_json_dict(self) -> dict:
        n = len(self.labels)
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                value = self.coefficients[i, j]
                row.append(None if i == j or not np.isfinite(value) else round(float(value), 4))
            rows.append(row)
        return {"labels": list(self.labels), "coefficients": rows}


def internal_consistency(series: Sequence[MetricSeries]) -> CorrelationTable:
    """Pairwise Spearman correlation across configurations of one metric."""
    series = list(series)
    if len(series) < 2:
        raise InvalidArgumentError("need at least two configurations")
    ids = series[0].sample_ids
    for s in series[1:]:
        if s.sample_ids != ids:
            raise AlignmentError(
                f"series {s.metric_id!r} is not aligned with {series[0].metric_id!r}"
            )
    n = len(series)
    coeff = np.full((n, n), np.nan)
    np.fill_diagonal(coeff, 1.0)
    for i in range(n):
        for j in range(i + 1, n):
            try:
                value = spearman(series[i].values, series[j].values)
            except UndefinedCorrelationError:
                value = np.nan
            coeff[i, j] = coeff[j, i] = value
    return CorrelationTable(tuple(s.metric_id for s in series), coeff)


def mean_tables(tables: Sequence[CorrelationTable]) -> CorrelationTable:
    """Cell-wise mean over per-method tables (undefined cells ignored)."""
    tables = list(tables)
    if not tables:
        raise InvalidArgumentError("need at least one table")
    labels = tables[0].labels
    for t in tables[1:]:
        if t.labels != labels:
            raise AlignmentError("tables must share identical labels")
    stack = np.stack([t.coefficients for t in tables])
    with np.errstate(invalid="ignore"):
        mean = np.where(np.isfinite(stack).any(axis=0), np.nanmean(stack, axis=0), np.nan)
    return CorrelationTable(labels, mean)


@dataclass(frozen=True)
class InterMethodResult:
    """Correlation between two metrics, before and after orienting both as higher-is-better."""

    fixed: float
    raw: float


def _oriented(series: MetricSeries, fix: bool) -> np.ndarray:
    values = series.values.astype(np.float64)
    if fix and series.polarity is Polarity.LOWER_BETTER:
        return 1.0 - values if series.kind is SeriesKind.BINARY else -values
    return values


def _correlate(a_values, a_kind, b_values, b_kind) -> float:
    if a_kind is SeriesKind.BINARY and b_kind is not SeriesKind.BINARY:
        return point_biserial(a_values, b_values)
    if b_kind is SeriesKind.BINARY and a_kind is not SeriesKind.BINARY:
        return point_biserial(b_values, a_values)
    # Two continuous (or two binary) series: rank correlation.
    return spearman(a_values, b_values)


def inter_method(a: MetricSeries, b: MetricSeries) -> InterMethodResult:
    """Reliability between two metrics over the same samples, with polarity fixing."""
    if a.sample_ids != b.sample_ids:
        raise AlignmentError(f"series {a.metric_id!r} and {b.metric_id!r} are not aligned")
    raw = _correlate(_oriented(a, False), a.kind, _oriented(b, False), b.kind)
    fixed = _correlate(_oriented(a, True), a.kind, _oriented(b, True), b.kind)
    return InterMethodResult(fixed=fixed, raw=raw)
