"""Tag-archive scraping with rate limits, retries and recorded-response replay."""

from __future__ import annotations

import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from urllib.parse import quote, urlparse

import requests

from techlens.corpus import Article, Corpus, DateRange, normalize_tag
from techlens.errors import FetchError, FixtureMissingError, NotFoundError, PageParseError
from techlens.pages import ArchiveItem, parse_archive_page, parse_article_page, parse_related_tags

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://medium.com"
DEFAULT_PAGE_CAP = 10_000
OFFLINE_ENV = "TECHLENS_OFFLINE"


@dataclass(frozen=True)
class FetchPolicy:
    max_concurrent_requests: int = 4
    min_request_interval: float = 1.0
    max_retries: int = 3
    user_agent: str = "techlens/0.1 (research crawler)"
    timeout: float = 30.0
    backoff: float = 1.0

    def __post_init__(self):
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be >= 1")
        if self.min_request_interval < 0:
            raise ValueError("min_request_interval must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class SkipReport:
    pages_fetched: int = 0
    page_cap_hit: bool = False
    out_of_range: int = 0
    duplicates: list[str] = field(default_factory=list)
    unparseable_dates: list[str] = field(default_factory=list)
    parse_errors: list[str] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return len(self.duplicates) + len(self.unparseable_dates) + len(self.parse_errors)

    def to_record(self) -> dict:
        return {
            "pages_fetched": self.pages_fetched,
            "page_cap_hit": self.page_cap_hit,
            "out_of_range": self.out_of_range,
            "duplicates": len(self.duplicates),
            "unparseable_dates": len(self.unparseable_dates),
            "parse_errors": len(self.parse_errors),
        }


def offline_forced() -> bool:
    return os.environ.get(OFFLINE_ENV, "").strip().lower() not in ("", "0", "false", "no")


def fixture_name(url: str) -> str:
    return quote(url, safe="")


class ReplayTransport:
    """Serves recorded response bodies from a directory, one file per URL."""

    stamps_fetch_time = False

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise FetchError(str(directory), "fixture directory does not exist")
        self.requests: list[str] = []
        self._lock = threading.Lock()

    def get(self, url: str) -> str:
        with self._lock:
            self.requests.append(url)
        path = self.directory / fixture_name(url)
        if not path.is_file():
            raise FixtureMissingError(url, f"no recorded response ({path.name})")
        return path.read_text(encoding="utf-8")


class _HostThrottle:
    def __init__(self, interval: float):
        self.interval = interval
        self._lock = threading.Lock()
        self._next: dict[str, float] = {}

    def wait(self, host: str) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next.get(host, now))
            self._next[host] = slot + self.interval
        delay = slot - now
        if delay > 0:
            time.sleep(delay)


class HttpTransport:
    stamps_fetch_time = True

    def __init__(self, policy: FetchPolicy):
        if offline_forced():
            raise FetchError("", f"{OFFLINE_ENV} is set; refusing to open network connections")
        self.policy = policy
        self._throttle = _HostThrottle(policy.min_request_interval)
        self._local = threading.local()
        self.requests: list[str] = []

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            session.headers["User-Agent"] = self.policy.user_agent
            self._local.session = session
        return session

    def get(self, url: str) -> str:
        host = urlparse(url).netloc
        last = "no attempt made"
        for attempt in range(self.policy.max_retries + 1):
            self._throttle.wait(host)
            self.requests.append(url)
            try:
                response = self._session().get(url, timeout=self.policy.timeout)
            except requests.RequestException as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                status = response.status_code
                if status == 404:
                    raise NotFoundError(url, "HTTP 404")
                if status == 429 or status >= 500:
                    last = f"HTTP {status}"
                elif status >= 400:
                    raise FetchError(url, f"HTTP {status}")
                else:
                    if response.encoding is None:
                        response.encoding = "utf-8"
                    return response.text
            if attempt < self.policy.max_retries:
                time.sleep(self.policy.backoff * 2**attempt)
        raise FetchError(url, f"gave up after {self.policy.max_retries + 1} attempts ({last})")


def make_transport(policy: FetchPolicy, fixtures: str | Path | None = None):
    """Replay transport when a fixture directory is given, live HTTP otherwise."""
    if fixtures is not None:
        return ReplayTransport(fixtures)
    return HttpTransport(policy)


def archive_url(endpoint: str, tag: str, page: int) -> str:
    return f"{endpoint.rstrip('/')}/tag/{quote(tag)}/archive?page={page}"


def tag_page_url(endpoint: str, tag: str) -> str:
    return f"{endpoint.rstrip('/')}/tag/{quote(tag)}"


def _discover(tag, date_range, endpoint, transport, page_cap, skip_unparseable, report) -> list[ArchiveItem]:
    found: list[ArchiveItem] = []
    seen: set[str] = set()
    for page in range(1, page_cap + 1):
        url = archive_url(endpoint, tag, page)
        try:
            html = transport.get(url)
        except NotFoundError:
            break
        report.pages_fetched += 1
        try:
            entries = parse_archive_page(html, url)
        except PageParseError:
            if not skip_unparseable:
                raise
            report.parse_errors.append(url)
            continue
        if not entries:
            break
        for item in entries:
            if item.url in seen:
                report.duplicates.append(item.url)
                continue
            seen.add(item.url)
            if item.published is not None and item.published not in date_range:
                report.out_of_range += 1
                continue
            found.append(item)
        dated = [e.published for e in entries if e.published is not None]
        if dated and max(dated) < date_range.start:
            break
    else:
        report.page_cap_hit = True
        log.warning("stopped %s archive at the page cap (%d pages)", tag, page_cap)
    return found


def fetch_tag_archive(
    tag: str,
    date_range: DateRange,
    policy: FetchPolicy | None = None,
    endpoint: str = DEFAULT_ENDPOINT,
    transport=None,
    page_cap: int = DEFAULT_PAGE_CAP,
    skip_unparseable: bool = False,
    report: SkipReport | None = None,
) -> Corpus:
    """Every article under a tag's archive published inside ``date_range``.

    Archive pages are walked newest first until an empty page, a page whose
    entries all predate the range, or ``page_cap``. Articles are then fetched
    concurrently within the policy limits. Skips are tallied in ``report``.
    """
    tag = normalize_tag(tag)
    if not tag:
        raise ValueError("tag must be non-empty")
    policy = policy or FetchPolicy()
    transport = transport or make_transport(policy)
    report = report if report is not None else SkipReport()

    items = _discover(tag, date_range, endpoint, transport, page_cap, skip_unparseable, report)

    def load(item: ArchiveItem):
        html = transport.get(item.url)
        try:
            return item.url, parse_article_page(html, item.url)
        except PageParseError:
            if not skip_unparseable:
                raise
            return item.url, None

    workers = min(policy.max_concurrent_requests, max(len(items), 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pages = list(pool.map(load, items))

    stamp = datetime.now(timezone.utc).replace(microsecond=0) if transport.stamps_fetch_time else None
    articles = []
    for url, parsed in pages:
        if parsed is None:
            report.parse_errors.append(url)
            continue
        if parsed["published"] is None:
            report.unparseable_dates.append(url)
            continue
        if parsed["published"] not in date_range:
            report.out_of_range += 1
            continue
        articles.append(Article(
            url=url,
            title=parsed["title"],
            body=parsed["body"],
            tags=tuple(parsed["tags"]),
            published=parsed["published"],
            fetched_at=stamp,
        ))
    return Corpus(articles, source_tag=tag, date_range=date_range)


def fetch_related_tags(
    tag: str,
    policy: FetchPolicy | None = None,
    endpoint: str = DEFAULT_ENDPOINT,
    transport=None,
) -> list[str]:
    tag = normalize_tag(tag)
    if not tag:
        raise ValueError("tag must be non-empty")
    transport = transport or make_transport(policy or FetchPolicy())
    url = tag_page_url(endpoint, tag)
    return list(dict.fromkeys(parse_related_tags(transport.get(url), url)))
