"""Article and corpus types, the line-delimited corpus file format, date filtering."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Any, Iterable, Iterator

from techlens.errors import CorpusParseError, SchemaError

_TAG_SEPARATORS = re.compile(r"[\s_]+")

REQUIRED_FIELDS = ("url", "title", "body", "tags", "published")
KNOWN_FIELDS = REQUIRED_FIELDS + ("fetched_at",)


def normalize_tag(raw: str) -> str:
    """Lowercase, trim, and replace whitespace/underscore runs with one hyphen.

    >>> normalize_tag("  Remote   Working ")
    'remote-working'
    """
    return _TAG_SEPARATORS.sub("-", raw.strip().lower())


def normalize_tags(raw_tags: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for raw in raw_tags:
        tag = normalize_tag(raw)
        if tag:
            seen.setdefault(tag, None)
    return tuple(seen)


@dataclass(frozen=True)
class DateRange:
    start: date
    end: date

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"empty date range: {self.start} > {self.end}")

    def __contains__(self, day: date) -> bool:
        return self.start <= day <= self.end

    @classmethod
    def parse(cls, start: str, end: str) -> DateRange:
        return cls(date.fromisoformat(start), date.fromisoformat(end))


@dataclass(frozen=True)
class Article:
    """One retrieved document.

    Tags are normalized and de-duplicated on construction, so callers may pass
    raw platform tags. Unknown record fields survive a load/save cycle via
    ``extra``.
    """

    url: str
    title: str
    body: str
    tags: tuple[str, ...]
    published: date
    fetched_at: datetime | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.url:
            raise ValueError("article url must be non-empty")
        object.__setattr__(self, "tags", normalize_tags(self.tags))

    def sort_key(self) -> tuple[date, str]:
        return (self.published, self.url)


class Corpus:
    """Immutable, date-bounded collection of articles with unique URLs.

    Iteration order is (published, url). When ``date_range`` is omitted it is
    taken as the span of the articles' dates (``None`` for an empty corpus).
    """

    def __init__(
        self,
        articles: Iterable[Article] = (),
        source_tag: str = "",
        date_range: DateRange | None = None,
    ):
        ordered = tuple(sorted(articles, key=Article.sort_key))
        urls = set()
        for article in ordered:
            if article.url in urls:
                raise ValueError(f"duplicate article url in corpus: {article.url}")
            urls.add(article.url)
            if date_range is not None and article.published not in date_range:
                raise ValueError(f"{article.url} published {article.published} outside {date_range}")
        if date_range is None and ordered:
            date_range = DateRange(ordered[0].published, ordered[-1].published)
        self._articles = ordered
        self.source_tag = source_tag
        self.date_range = date_range

    @property
    def articles(self) -> tuple[Article, ...]:
        return self._articles

    def __iter__(self) -> Iterator[Article]:
        return iter(self._articles)

    def __len__(self) -> int:
        return len(self._articles)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self._articles == other._articles
            and self.source_tag == other.source_tag
            and self.date_range == other.date_range
        )

    def __repr__(self) -> str:
        return f"Corpus({len(self)} articles, source_tag={self.source_tag!r}, date_range={self.date_range})"


def filter_by_date(corpus: Corpus, date_range: DateRange) -> Corpus:
    kept = [a for a in corpus if a.published in date_range]
    return Corpus(kept, source_tag=corpus.source_tag, date_range=date_range)


def _parse_timestamp(value: str) -> datetime:
    # fromisoformat on 3.10 rejects the trailing Z
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    return datetime.fromisoformat(value)


def article_from_record(record: dict[str, Any], line: int | None = None) -> Article:
    for name in REQUIRED_FIELDS:
        if name not in record:
            raise SchemaError(f"missing required field {name!r}", line=line, field=name)
    for name in ("url", "title", "body", "published"):
        if not isinstance(record[name], str):
            raise SchemaError(f"field {name!r} must be a string", line=line, field=name)
    tags = record["tags"]
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise SchemaError("field 'tags' must be an array of strings", line=line, field="tags")
    if not record["url"]:
        raise SchemaError("field 'url' must be non-empty", line=line, field="url")
    try:
        published = date.fromisoformat(record["published"])
    except ValueError:
        raise SchemaError(f"field 'published' is not a YYYY-MM-DD date: {record['published']!r}",
                          line=line, field="published") from None
    fetched_at = None
    if record.get("fetched_at") is not None:
        try:
            fetched_at = _parse_timestamp(str(record["fetched_at"]))
        except ValueError:
            raise SchemaError(f"field 'fetched_at' is not an ISO 8601 timestamp", line=line,
                              field="fetched_at") from None
    extra = {k: v for k, v in record.items() if k not in KNOWN_FIELDS}
    return Article(
        url=record["url"],
        title=record["title"],
        body=record["body"],
        tags=tuple(tags),
        published=published,
        fetched_at=fetched_at,
        extra=extra,
    )


def article_to_record(article: Article) -> dict[str, Any]:
    record: dict[str, Any] = {
        "url": article.url,
        "title": article.title,
        "body": article.body,
        "tags": list(article.tags),
        "published": article.published.isoformat(),
    }
    if article.fetched_at is not None:
        record["fetched_at"] = article.fetched_at.isoformat()
    for key, value in article.extra.items():
        record.setdefault(key, value)
    return record


def load_corpus(path: str | Path, source_tag: str = "") -> Corpus:
    articles = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(f"malformed record: {exc.msg}", line=lineno) from None
            if not isinstance(record, dict):
                raise CorpusParseError("record is not an object", line=lineno)
            article = article_from_record(record, line=lineno)
            if article.url in seen:
                raise SchemaError(f"duplicate url {article.url!r}", line=lineno, field="url")
            seen.add(article.url)
            articles.append(article)
    return Corpus(articles, source_tag=source_tag)


def save_corpus(corpus: Iterable[Article], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for article in corpus:
            fh.write(json.dumps(article_to_record(article), ensure_ascii=False))
            fh.write("\n")

