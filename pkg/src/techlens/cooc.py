"""Document-level co-occurrence matrices, grouped min-max normalization, tag time series."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from techlens.corpus import Article, normalize_tag
from techlens.errors import DomainError
from techlens.extract import tech_sets
from techlens.techdict import TechDictionary

ItemSets = Callable[[Article], Iterable[str]]

GRANULARITIES = ("day", "week", "month")
GROUP_AXES = ("col", "row")
DEFAULT_STOPLIST = frozenset({"covid", "covid-19", "coronavirus", "pandemic"})


@dataclass(frozen=True, eq=False)
class CoocMatrix:
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    counts: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        if self.counts.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(
                f"counts shape {self.counts.shape} does not match "
                f"{len(self.row_labels)}x{len(self.col_labels)} labels"
            )
        if self.symmetric and self.row_labels != self.col_labels:
            raise ValueError("symmetric matrix needs identical row and column labels")

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoocMatrix):
            return NotImplemented
        return (
            self.row_labels == other.row_labels
            and self.col_labels == other.col_labels
            and self.symmetric == other.symmetric
            and np.array_equal(self.counts, other.counts)
        )

    def get(self, row: str, col: str) -> int:
        return int(self.counts[self.row_labels.index(row), self.col_labels.index(col)])

    def doc_freq(self) -> dict[str, int]:
        """Diagonal of a symmetric matrix, i.e. per-item document frequency."""
        if not self.symmetric:
            raise DomainError("document frequencies live on the diagonal of symmetric matrices only")
        return {label: int(self.counts[i, i]) for i, label in enumerate(self.row_labels)}


@dataclass(frozen=True, eq=False)
class NormalizedMatrix:
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    values: np.ndarray
    group_axis: str = "col"

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class TimeSeries:
    granularity: str
    points: tuple[tuple[date, int], ...] = ()
    trend: tuple[float, float] | None = None

    @property
    def counts(self) -> list[int]:
        return [c for _, c in self.points]

    def __len__(self) -> int:
        return len(self.points)


def build_cooccurrence(
    articles: Iterable[Article], row_items: ItemSets, col_items: ItemSets | None = None
) -> CoocMatrix:
    """Count, for every (row item, col item), the documents containing both.

    Passing no ``col_items`` (or the same callable twice) yields a symmetric
    matrix whose diagonal is each item's document frequency.
    """
    symmetric = col_items is None or col_items is row_items
    doc_rows: list[set[str]] = []
    doc_cols: list[set[str]] = []
    for article in articles:
        rows = set(row_items(article))
        doc_rows.append(rows)
        doc_cols.append(rows if symmetric else set(col_items(article)))
    row_labels = tuple(sorted(set().union(*doc_rows))) if doc_rows else ()
    col_labels = row_labels if symmetric else (tuple(sorted(set().union(*doc_cols))) if doc_cols else ())
    row_index = {label: i for i, label in enumerate(row_labels)}
    col_index = {label: i for i, label in enumerate(col_labels)}
    counts = np.zeros((len(row_labels), len(col_labels)), dtype=np.int64)
    for rows, cols in zip(doc_rows, doc_cols):
        if rows and cols:
            r = [row_index[x] for x in rows]
            c = [col_index[x] for x in cols]
            counts[np.ix_(r, c)] += 1
    return CoocMatrix(row_labels, col_labels, counts, symmetric=symmetric)


def other_tags(article: Article, dictionary: TechDictionary, stoplist: Iterable[str] = ()) -> set[str]:
    stop = {normalize_tag(s) for s in stoplist}
    return {t for t in article.tags if t not in stop and dictionary.classify(t) is None}


def drop_empty(matrix: CoocMatrix) -> CoocMatrix:
    """Remove all-zero rows and columns (bipartite matrices only)."""
    if matrix.symmetric:
        raise DomainError("refusing to drop rows/cols of a symmetric matrix independently")
    keep_r = matrix.counts.sum(axis=1) > 0 if matrix.counts.size else np.zeros(len(matrix.row_labels), bool)
    keep_c = matrix.counts.sum(axis=0) > 0 if matrix.counts.size else np.zeros(len(matrix.col_labels), bool)
    return CoocMatrix(
        tuple(l for l, k in zip(matrix.row_labels, keep_r) if k),
        tuple(l for l, k in zip(matrix.col_labels, keep_c) if k),
        matrix.counts[np.ix_(keep_r, keep_c)],
        symmetric=False,
    )


def tech_other_matrix(
    articles: Iterable[Article],
    dictionary: TechDictionary,
    stoplist: Iterable[str] = DEFAULT_STOPLIST,
    jobs: int = 1,
) -> CoocMatrix:
    """Technologies (rows) against non-technology tags (columns)."""
    articles = list(articles)
    stop = {normalize_tag(s) for s in stoplist}
    techs = dict(zip((a.url for a in articles), tech_sets(articles, dictionary, jobs=jobs)))
    matrix = build_cooccurrence(
        articles,
        lambda a: techs[a.url],
        lambda a: other_tags(a, dictionary, stop),
    )
    return drop_empty(matrix)


def tag_matrix(
    articles: Iterable[Article],
    dictionary: TechDictionary,
    stoplist: Iterable[str] = (),
    jobs: int = 1,
) -> CoocMatrix:
    """Symmetric matrix over technologies and other tags together.

    Technologies are keyed by canonical term, whether found in text or as a
    tag; other tags by their normalized form. The diagonal is tag usage.
    """
    articles = list(articles)
    stop = {normalize_tag(s) for s in stoplist}
    techs = dict(zip((a.url for a in articles), tech_sets(articles, dictionary, jobs=jobs)))

    def items(article: Article) -> set[str]:
        return {t for t in techs[article.url] if normalize_tag(t) not in stop} | other_tags(article, dictionary, stop)

    return build_cooccurrence(articles, items)


def minmax_normalize_by_group(matrix: CoocMatrix, group_axis: str = "col") -> NormalizedMatrix:
    """Rescale each column (or row) to [0, 1] with (v - min) / (max - min).

    A constant group maps to 0.0 when all-zero and to 1.0 otherwise.
    """
    if group_axis not in GROUP_AXES:
        raise DomainError(f"group_axis must be one of {GROUP_AXES}, got {group_axis!r}")
    if matrix.counts.size == 0:
        raise DomainError("cannot normalize an empty matrix")
    values = matrix.counts.astype(np.float64)
    if group_axis == "row":
        values = values.T
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    span = hi - lo
    out = np.empty_like(values)
    varied = span > 0
    out[:, varied] = (values[:, varied] - lo[varied]) / span[varied]
    out[:, ~varied] = np.where(hi[~varied] > 0, 1.0, 0.0)
    if group_axis == "row":
        out = out.T
    return NormalizedMatrix(matrix.row_labels, matrix.col_labels, out, group_axis)


def _check_granularity(granularity: str) -> None:
    if granularity not in GRANULARITIES:
        raise DomainError(f"granularity must be one of {GRANULARITIES}, got {granularity!r}")


def bucket_start(day: date, granularity: str) -> date:
    _check_granularity(granularity)
    if granularity == "day":
        return day
    if granularity == "week":
        return day - timedelta(days=day.weekday())
    return day.replace(day=1)


def next_bucket(start: date, granularity: str) -> date:
    if granularity == "day":
        return start + timedelta(days=1)
    if granularity == "week":
        return start + timedelta(days=7)
    return date(start.year + start.month // 12, start.month % 12 + 1, 1)


def series_from_dates(dates: Iterable[date], granularity: str) -> TimeSeries:
    """Bucket dates and zero-fill between the first and last non-empty bucket."""
    _check_granularity(granularity)
    counts = Counter(bucket_start(d, granularity) for d in dates)
    if not counts:
        return TimeSeries(granularity)
    points = []
    current, last = min(counts), max(counts)
    while current <= last:
        points.append((current, counts.get(current, 0)))
        current = next_bucket(current, granularity)
    return TimeSeries(granularity, tuple(points))


def tag_timeseries(articles: Iterable[Article], tag: str, granularity: str = "month") -> TimeSeries:
    tag = normalize_tag(tag)
    return series_from_dates((a.published for a in articles if tag in a.tags), granularity)


def tech_stats_series(
    articles: Iterable[Article], dictionary: TechDictionary, granularity: str = "month", jobs: int = 1
) -> TimeSeries:
    """Per-bucket number of articles mentioning at least one technology."""
    articles = list(articles)
    sets = tech_sets(articles, dictionary, jobs=jobs)
    return series_from_dates((a.published for a, s in zip(articles, sets) if s), granularity)


def linear_trend(series: TimeSeries | Sequence[float]) -> tuple[float, float]:
    """Least-squares line through the counts against bucket index 0..n-1."""
    ys = series.counts if isinstance(series, TimeSeries) else list(series)
    n = len(ys)
    if n < 2:
        raise DomainError(f"a trend needs at least 2 points, got {n}")
    x_mean = (n - 1) / 2
    y_mean = math.fsum(ys) / n
    sxx = math.fsum((i - x_mean) ** 2 for i in range(n))
    sxy = math.fsum((i - x_mean) * (y - y_mean) for i, y in enumerate(ys))
    slope = sxy / sxx
    return slope, y_mean - slope * x_mean


def with_trend(series: TimeSeries) -> TimeSeries:
    return TimeSeries(series.granularity, series.points, linear_trend(series))


def _format_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6f}"


def write_matrix_csv(matrix: CoocMatrix | NormalizedMatrix, path: str | Path) -> None:
    data = matrix.counts if isinstance(matrix, CoocMatrix) else matrix.values
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([""] + list(matrix.col_labels))
        for label, row in zip(matrix.row_labels, data):
            writer.writerow([label] + [_format_cell(v) for v in row.tolist()])


def read_matrix_csv(path: str | Path, symmetric: bool | None = None) -> CoocMatrix:
    """Read an integer matrix CSV; symmetry is detected unless given."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return CoocMatrix((), (), np.zeros((0, 0), dtype=np.int64), symmetric=bool(symmetric))
    col_labels = tuple(rows[0][1:])
    row_labels = tuple(r[0] for r in rows[1:])
    counts = np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64).reshape(
        len(row_labels), len(col_labels)
    )
    if symmetric is None:
        symmetric = row_labels == col_labels and np.array_equal(counts, counts.T)
    return CoocMatrix(row_labels, col_labels, counts, symmetric=symmetric)


def write_series_csv(series: TimeSeries, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bucket", "count"])
        for start, count in series.points:
            writer.writerow([start.isoformat(), count])


def read_series_csv(path: str | Path, granularity: str) -> TimeSeries:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        points = tuple((date.fromisoformat(r["bucket"]), int(r["count"])) for r in reader)
    return TimeSeries(granularity, points)
