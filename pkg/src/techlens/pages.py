"""HTML parsing for the tag-archive page shape: archive listings, articles, tag pages.

Archive page::

    <div class="post-item">
      <a class="post-link" href="/p/some-post">Title</a>
      <time datetime="2020-03-05">Mar 5</time>
    </div>

Article page: an ``<article>`` holding an ``<h1>`` title, the post body (a
``<section class="body">`` when present), a ``<time datetime>`` or an
``article:published_time`` meta tag, and a ``<ul class="tags">`` of ``/tag/``
links. Tag page: a ``class="related-tags"`` container of ``/tag/`` links.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from urllib.parse import unquote, urldefrag, urljoin, urlparse

from bs4 import BeautifulSoup, Comment, Declaration, Doctype, NavigableString, ProcessingInstruction, Tag

from techlens.corpus import normalize_tag
from techlens.errors import PageParseError

SKIP_TAGS = {"script", "style", "noscript", "template", "svg", "iframe", "head"}
BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "dd", "div", "dl", "dt", "figcaption", "figure",
    "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav",
    "ol", "p", "pre", "section", "table", "tbody", "td", "th", "thead", "tr", "ul",
}
_NON_TEXT = (Comment, Declaration, Doctype, ProcessingInstruction)


@dataclass(frozen=True)
class ArchiveItem:
    url: str
    published: date | None


def _soup(html: str) -> BeautifulSoup:
    return BeautifulSoup(html, "html.parser")


def html_to_text(node: Tag) -> str:
    """Plain text of a subtree: scripts and styles dropped, one line per block."""
    lines: list[str] = []
    buf: list[str] = []

    def flush():
        text = " ".join("".join(buf).split())
        if text:
            lines.append(text)
        buf.clear()

    def walk(el: Tag):
        for child in el.children:
            if isinstance(child, _NON_TEXT):
                continue
            if isinstance(child, NavigableString):
                buf.append(str(child))
            elif isinstance(child, Tag):
                name = child.name.lower()
                if name in SKIP_TAGS:
                    continue
                if name == "br":
                    flush()
                    continue
                block = name in BLOCK_TAGS
                if block:
                    flush()
                walk(child)
                if block:
                    flush()

    walk(node)
    flush()
    return "\n".join(lines)


def parse_date(value: str | None) -> date | None:
    if not value:
        return None
    try:
        return date.fromisoformat(value.strip()[:10])
    except ValueError:
        return None


def tag_from_link(link: Tag) -> str:
    """Normalized tag named by a ``/tag/<slug>`` link, falling back to its text."""
    path = urlparse(link.get("href", "")).path.rstrip("/")
    parts = path.split("/")
    if len(parts) >= 2 and parts[-2] == "tag" and parts[-1]:
        return normalize_tag(unquote(parts[-1]))
    return normalize_tag(link.get_text(" ", strip=True))


def parse_archive_page(html: str, page_url: str) -> list[ArchiveItem]:
    soup = _soup(html)
    items = []
    for el in soup.select(".post-item"):
        link = el.select_one("a.post-link[href]") or el.select_one("a[href]")
        if link is None:
            raise PageParseError(page_url, "archive entry without a link")
        url, _ = urldefrag(urljoin(page_url, link["href"]))
        time_el = el.find("time")
        published = parse_date(time_el.get("datetime") if time_el is not None else None)
        items.append(ArchiveItem(url, published))
    return items


def parse_article_page(html: str, url: str) -> dict:
    """Title, body text, raw tag list and publication date (``None`` when unparseable)."""
    soup = _soup(html)
    article = soup.find("article")
    if article is None:
        raise PageParseError(url, "no <article> element")

    heading = article.find("h1")
    if heading is not None:
        title = heading.get_text(" ", strip=True)
    else:
        og = soup.find("meta", attrs={"property": "og:title"})
        title = og.get("content", "").strip() if og is not None else ""
    if not title:
        raise PageParseError(url, "article has no title")

    meta_date = soup.find("meta", attrs={"property": "article:published_time"})
    raw_date = meta_date.get("content") if meta_date is not None else None
    if raw_date is None:
        time_el = article.find("time")
        raw_date = time_el.get("datetime") if time_el is not None else None

    tag_box = article.find(class_="tags")
    if tag_box is not None:
        tags = [tag_from_link(a) for a in tag_box.find_all("a")]
        tag_box.decompose()
    else:
        tags = [normalize_tag(m.get("content", "")) for m in soup.find_all("meta", attrs={"property": "article:tag"})]

    body_el = article.find("section", class_="body") or article
    if heading is not None and body_el is article:
        heading.decompose()
    for time_el in body_el.find_all("time"):
        time_el.decompose()
    return {
        "title": title,
        "body": html_to_text(body_el),
        "tags": [t for t in tags if t],
        "published": parse_date(raw_date),
    }


def parse_related_tags(html: str, url: str) -> list[str]:
    soup = _soup(html)
    box = soup.find(class_="related-tags")
    if box is None:
        return []
    return [t for t in (tag_from_link(a) for a in box.find_all("a")) if t]
