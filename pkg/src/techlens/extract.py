"""Technology mentions in articles and corpus-level extraction statistics."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from techlens.corpus import Article
from techlens.techdict import TechDictionary, TechEntry

FIELDS = ("title", "body", "tag")


@dataclass(frozen=True)
class Mention:
    entry: TechEntry
    article_url: str
    field: str
    span: tuple[int, int] | None
    surface: str

    @property
    def start(self) -> int | None:
        return self.span[0] if self.span else None

    @property
    def end(self) -> int | None:
        return self.span[1] if self.span else None

    def to_record(self) -> dict:
        return {
            "url": self.article_url,
            "field": self.field,
            "start": self.start,
            "end": self.end,
            "surface": self.surface,
            "canonical": self.entry.canonical,
            "cluster": self.entry.cluster,
        }


@dataclass
class CorpusTechStats:
    total_articles: int = 0
    articles_with_tech: int = 0
    per_entry_doc_freq: dict[str, int] = field(default_factory=dict)

    def to_record(self) -> dict:
        """Flat record; per-entry frequencies appear as ``doc_freq.<canonical>`` keys."""
        record: dict = {
            "total_articles": self.total_articles,
            "articles_with_tech": self.articles_with_tech,
        }
        for canonical, count in sorted(self.per_entry_doc_freq.items()):
            record[f"doc_freq.{canonical}"] = count
        return record


def extract_mentions(article: Article, dictionary: TechDictionary) -> list[Mention]:
    """Dictionary hits in title and body, then one mention per technology tag.

    Text matches never overlap within a field; ordering is title, body, tag
    and by offset inside a field (tag mentions keep the article's tag order).
    """
    mentions = []
    for name in ("title", "body"):
        for hit in dictionary.scan(getattr(article, name)):
            mentions.append(Mention(hit.entry, article.url, name, (hit.start, hit.end), hit.surface))
    for tag in article.tags:
        entry = dictionary.classify(tag)
        if entry is not None:
            mentions.append(Mention(entry, article.url, "tag", None, tag))
    return mentions


def document_tech_set(article: Article, dictionary: TechDictionary) -> frozenset[str]:
    return frozenset(m.entry.canonical for m in extract_mentions(article, dictionary))


def tech_sets(
    articles: Iterable[Article], dictionary: TechDictionary, jobs: int = 1
) -> list[frozenset[str]]:
    """document_tech_set over many articles, in input order."""
    articles = list(articles)
    if jobs <= 1 or len(articles) < 2:
        return [document_tech_set(a, dictionary) for a in articles]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda a: document_tech_set(a, dictionary), articles))


def corpus_tech_stats(articles: Iterable[Article], dictionary: TechDictionary, jobs: int = 1) -> CorpusTechStats:
    stats = CorpusTechStats()
    for techs in tech_sets(articles, dictionary, jobs=jobs):
        stats.total_articles += 1
        if techs:
            stats.articles_with_tech += 1
        for canonical in techs:
            stats.per_entry_doc_freq[canonical] = stats.per_entry_doc_freq.get(canonical, 0) + 1
    return stats


def write_mentions(mentions: Iterable[Mention], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for mention in mentions:
            fh.write(json.dumps(mention.to_record(), ensure_ascii=False) + "\n")
            count += 1
    return count


def write_stats(stats: CorpusTechStats, path: str | Path) -> None:
    Path(path).write_text(json.dumps(stats.to_record(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
