"""Technology gazetteer: loading, inflection-aware matchers, tag classification.

Matching rules, applied identically to body text and to tags:

* case-insensitive;
* a match must start and end on a word boundary, where word characters are
  unicode letters and digits (underscore and apostrophe break words);
* tokens of a multiword surface may be separated by one run of whitespace or
  by a single hyphen;
* the final token may carry an ``s`` or ``es`` suffix. Irregular plurals must
  be listed as aliases.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from techlens.errors import DictionaryError, SchemaError

HEADER = ["canonical", "cluster", "aliases"]
CLUSTER_DIRECTIVE = "# clusters:"

# word characters are letters and digits; \w minus underscore
_WORD = r"[^\W_]"
_BEFORE = rf"(?<!{_WORD})"
_AFTER = rf"(?!{_WORD})"
_SEPARATOR = r"(?:\s+|-)"
_SUFFIX = r"(?:s|es)?"
_TOKEN_SPLIT = re.compile(r"[\s\-]+")
_WHITESPACE = re.compile(r"\s+")

REFERENCE_CLUSTERS = (
    "big data",
    "transactions, digital certification, digital currency",
    "programming languages",
    "computing",
    "embedded systems",
    "intel technologies",
    "internet of things",
    "protocols and architectures",
    "communication networks and infrastructures",
    "production technologies",
    "identification technologies",
)


def normalize_surface(term: str) -> str:
    """Lowercase and trim a dictionary term, collapsing internal whitespace to single spaces."""
    return _WHITESPACE.sub(" ", term.strip().lower())


def surface_key(term: str) -> str:
    """Identity of a surface for collision checks: hyphens and spaces are interchangeable."""
    return " ".join(t for t in _TOKEN_SPLIT.split(term.strip().lower()) if t)


def pattern_source(surface: str) -> str:
    tokens = [t for t in _TOKEN_SPLIT.split(normalize_surface(surface)) if t]
    if not tokens:
        raise ValueError("cannot compile an empty surface")
    return _BEFORE + _SEPARATOR.join(re.escape(t) for t in tokens) + _SUFFIX + _AFTER


def compile_pattern(surface: str) -> re.Pattern[str]:
    return re.compile(pattern_source(surface), re.IGNORECASE)


@dataclass(frozen=True)
class TechEntry:
    canonical: str
    cluster: str
    aliases: tuple[str, ...] = ()

    @property
    def surfaces(self) -> tuple[str, ...]:
        return (self.canonical,) + self.aliases


@dataclass(frozen=True)
class Match:
    start: int
    end: int
    entry: TechEntry
    surface: str


class _Bucket:
    """All surfaces sharing a first character, compiled into one regex.

    Every surface sits in its own optional lookahead group, so a single
    ``match`` call at a position reports every surface that matches there.
    """

    def __init__(self, members: list[tuple[str, TechEntry]]):
        self.members = members
        self.pattern = re.compile(
            "".join(f"(?:(?=({pattern_source(s)})))?" for s, _ in members),
            re.IGNORECASE,
        )

    def matches_at(self, text: str, pos: int) -> Iterator[tuple[int, str, TechEntry]]:
        m = self.pattern.match(text, pos)
        if m is None:
            return
        regs = m.regs
        for i, (surface, entry) in enumerate(self.members, start=1):
            start, end = regs[i]
            if start >= 0:
                yield end, surface, entry


class TechDictionary:
    """Immutable gazetteer with a collision-free surface index and compiled matchers."""

    def __init__(self, entries: Iterable[TechEntry] = (), clusters: Iterable[str] | None = None):
        self.entries: tuple[TechEntry, ...] = tuple(entries)
        self.clusters: tuple[str, ...] | None = tuple(clusters) if clusters is not None else None
        self.surface_index: dict[str, TechEntry] = {}
        self.patterns: dict[str, re.Pattern[str]] = {}
        by_first: dict[str, list[tuple[str, TechEntry]]] = {}
        for entry in self.entries:
            for surface in entry.surfaces:
                key = surface_key(surface)
                owner = self.surface_index.get(key)
                if owner is not None and owner is not entry:
                    raise DictionaryError(
                        f"surface {surface!r} claimed by both {owner.canonical!r} and {entry.canonical!r}"
                    )
                if owner is entry:
                    continue
                self.surface_index[key] = entry
                self.patterns[surface] = compile_pattern(surface)
                by_first.setdefault(key[0], []).append((surface, entry))
        self._buckets = {ch: _Bucket(members) for ch, members in by_first.items()}
        self._by_canonical = {e.canonical: e for e in self.entries}
        self._rank = {e.canonical: i for i, e in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TechEntry]:
        return iter(self.entries)

    def __contains__(self, canonical: object) -> bool:
        return canonical in self._by_canonical

    def get(self, canonical: str) -> TechEntry | None:
        return self._by_canonical.get(canonical)

    def _best_at(self, text: str, pos: int) -> Match | None:
        bucket = self._buckets.get(text[pos].lower())
        if bucket is None:
            return None
        best: tuple[int, bool, int] | None = None
        best_match = None
        for end, surface, entry in bucket.matches_at(text, pos):
            # longest first, then an uninflected hit, then dictionary order
            exact = surface_key(text[pos:end]) == surface_key(surface)
            rank = (end, exact, -self._rank[entry.canonical])
            if best is None or rank > best:
                best = rank
                best_match = Match(pos, end, entry, text[pos:end])
        return best_match

    def scan(self, text: str) -> list[Match]:
        """Non-overlapping matches: longest wins at a start, leftmost first, resume at match end."""
        found = []
        pos = 0
        n = len(text)
        while pos < n:
            if text[pos].isalnum() and pos > 0 and text[pos - 1].isalnum():
                pos += 1
                continue
            hit = self._best_at(text, pos)
            if hit is None:
                pos += 1
            else:
                found.append(hit)
                pos = hit.end
        return found

    def classify(self, tag: str) -> TechEntry | None:
        text = tag.replace("-", " ").strip()
        if not text:
            return None
        exact = self.surface_index.get(surface_key(text))
        if exact is not None:
            return exact
        hit = self._best_at(text, 0)
        if hit is not None and hit.end == len(text):
            return hit.entry
        return None


def classify_tag(tag: str, dictionary: TechDictionary) -> TechEntry | None:
    """Return the entry a tag names (``Tech``), or ``None`` for an ``Other`` tag.

    Hyphens are read as spaces and the usual inflection rule applies, so
    ``"blockchains"`` classifies as the ``blockchain`` entry.
    """
    return dictionary.classify(tag)


def _read_rows(lines: list[str], source: str):
    clusters: list[str] | None = None
    content: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped.lower().startswith(CLUSTER_DIRECTIVE):
            declared = stripped[len(CLUSTER_DIRECTIVE):]
            clusters = [normalize_surface(c) for c in declared.split("|") if c.strip()]
            continue
        if not stripped or stripped.startswith("#"):
            continue
        content.append((lineno, line))
    if not content:
        return clusters, []
    header_line, header = content[0]
    parsed_header = [h.strip().lower() for h in next(csv.reader([header]))]
    if parsed_header != HEADER:
        raise DictionaryError(f"{source}: expected header {','.join(HEADER)}, got {header.strip()!r}")
    rows = []
    for lineno, line in content[1:]:
        row = next(csv.reader([line]))
        if len(row) < 2 or len(row) > 3:
            raise SchemaError(f"expected 2 or 3 columns, got {len(row)}", line=lineno)
        rows.append((lineno, row))
    return clusters, rows


def parse_dictionary(text: str, source: str = "<string>", clusters: Iterable[str] | None = None) -> TechDictionary:
    declared, rows = _read_rows(io.StringIO(text).read().splitlines(), source)
    if clusters is not None:
        declared = [normalize_surface(c) for c in clusters]
    allowed = set(declared) if declared is not None else None
    entries = []
    for lineno, row in rows:
        canonical = normalize_surface(row[0])
        cluster = normalize_surface(row[1])
        if not canonical:
            raise SchemaError("empty canonical term", line=lineno, field="canonical")
        if not cluster:
            raise SchemaError(f"empty cluster for {canonical!r}", line=lineno, field="cluster")
        if allowed is not None and cluster not in allowed:
            raise SchemaError(f"unknown cluster {cluster!r} for {canonical!r}", line=lineno, field="cluster")
        aliases: list[str] = []
        keys = {surface_key(canonical)}
        for raw in (row[2] if len(row) == 3 else "").split("|"):
            alias = normalize_surface(raw)
            if alias and surface_key(alias) not in keys:
                keys.add(surface_key(alias))
                aliases.append(alias)
        entries.append(TechEntry(canonical, cluster, tuple(aliases)))
    return TechDictionary(entries, clusters=declared)


def load_dictionary(path: str | Path, clusters: Iterable[str] | None = None) -> TechDictionary:
    """Load a ``canonical,cluster,aliases`` CSV gazetteer.

    A ``# clusters: a|b|c`` comment line declares the allowed cluster set;
    without one any non-empty cluster label is accepted.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_dictionary(text, source=str(path), clusters=clusters)


def demo_dictionary_path() -> Path:
    return Path(str(resources.files("techlens") / "data" / "demo_dictionary.csv"))


def load_demo_dictionary() -> TechDictionary:
    return load_dictionary(demo_dictionary_path())
