import json
from datetime import date

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from oracles import naive_mentions
from techlens import Article, TechDictionary, TechEntry
from techlens.extract import (
    corpus_tech_stats,
    document_tech_set,
    extract_mentions,
    tech_sets,
    write_mentions,
    write_stats,
)

DAY = date(2020, 3, 1)


def article(body="", title="", tags=()):
    return Article(url="https://x.example/a", title=title, body=body, tags=tuple(tags), published=DAY)


def test_two_body_mentions():
    d = TechDictionary([TechEntry("iot", "c"), TechEntry("blockchain", "c")])
    got = extract_mentions(article("IoT and blockchains converge"), d)
    assert [(m.field, m.span, m.surface, m.entry.canonical) for m in got] == [
        ("body", (0, 3), "IoT", "iot"),
        ("body", (8, 19), "blockchains", "blockchain"),
    ]


def test_other_tag_only_gives_nothing(demo_dict):
    assert extract_mentions(article(tags=["economy"]), demo_dict) == []


def test_longest_match_wins_at_same_start(demo_dict):
    got = extract_mentions(article("cloud computing is not just cloud"), demo_dict)
    assert [(m.surface, m.entry.canonical) for m in got] == [
        ("cloud computing", "cloud computing"),
        ("cloud", "cloud computing"),
    ]


def test_document_tech_set_examples(demo_dict):
    assert document_tech_set(article("blockchain " * 5), demo_dict) == {"blockchain"}
    assert document_tech_set(article("nothing here", tags=["robotics"]), demo_dict) == {"robot"}
    assert document_tech_set(article("nothing here"), demo_dict) == frozenset()


def _as_tuples(mentions):
    return [(m.field, m.start, m.end, m.entry.canonical, m.surface) for m in mentions]


def test_fixture_corpus_equals_naive_oracle(corpus12, demo_dict):
    for a in corpus12:
        assert _as_tuples(extract_mentions(a, demo_dict)) == naive_mentions(a, demo_dict), a.url


def test_generated_corpus_equals_naive_oracle(corpus50, demo_dict):
    for a in corpus50:
        assert _as_tuples(extract_mentions(a, demo_dict)) == naive_mentions(a, demo_dict), a.url


def test_gold_extraction(extraction20, demo_dict):
    gold = json.loads((FIXTURES / "extraction20_gold.json").read_text())
    by_url = {a.url: a for a in extraction20}
    expected = []
    for g in gold:
        a = by_url[g["url"]]
        if g["field"] == "tag":
            expected.append((g["url"], "tag", None, None, g["canonical"], g["surface"]))
            continue
        text = getattr(a, g["field"])
        start = -1
        for _ in range(g["nth"] + 1):
            start = text.find(g["surface"], start + 1)
        assert start >= 0, g
        expected.append((g["url"], g["field"], start, start + len(g["surface"]), g["canonical"], g["surface"]))
    got = [(a.url,) + t for a in extraction20 for t in _as_tuples(extract_mentions(a, demo_dict))]
    assert got == expected


def test_mention_invariants(corpus50, demo_dict):
    for a in corpus50:
        mentions = extract_mentions(a, demo_dict)
        for m in mentions:
            if m.span is not None:
                assert m.start < m.end
                assert getattr(a, m.field)[m.start:m.end] == m.surface
        for field in ("title", "body"):
            spans = [m.span for m in mentions if m.field == field]
            assert spans == sorted(spans)
            assert all(a_end <= b_start for (_, a_end), (b_start, _) in zip(spans, spans[1:]))
        assert document_tech_set(a, demo_dict) == {m.entry.canonical for m in mentions}


def test_corpus_stats(corpus12, demo_dict):
    stats = corpus_tech_stats(corpus12, demo_dict)
    assert (stats.total_articles, stats.articles_with_tech) == (12, 5)
    assert stats.per_entry_doc_freq == {
        "blockchain": 1,
        "internet of things": 2,
        "robot": 1,
        "bluetooth": 1,
        "facial recognition": 1,
        "videoconferencing": 1,
        "cloud computing": 1,
        "wearable device": 1,
    }
    empty = corpus_tech_stats([], demo_dict)
    assert (empty.total_articles, empty.articles_with_tech, empty.per_entry_doc_freq) == (0, 0, {})


def test_parallel_tech_sets_keep_order(corpus50, demo_dict):
    assert tech_sets(corpus50, demo_dict, jobs=4) == tech_sets(corpus50, demo_dict, jobs=1)


def test_exports(corpus12, demo_dict, tmp_path):
    mentions = [m for a in corpus12 for m in extract_mentions(a, demo_dict)]
    n = write_mentions(mentions, tmp_path / "m.jsonl")
    lines = (tmp_path / "m.jsonl").read_text(encoding="utf-8").splitlines()
    assert n == len(lines) == len(mentions)
    first = json.loads(lines[0])
    assert set(first) == {"url", "field", "start", "end", "surface", "canonical", "cluster"}
    write_stats(corpus_tech_stats(corpus12, demo_dict), tmp_path / "s.json")
    record = json.loads((tmp_path / "s.json").read_text())
    assert record["total_articles"] == 12 and record["doc_freq.internet of things"] == 2
    assert all(not isinstance(v, (dict, list)) for v in record.values())


POOL = ["alpha", "beta", "gamma", "delta", "epsilon"]


@st.composite
def dictionaries(draw):
    picks = draw(st.lists(st.sampled_from(POOL), unique=True, min_size=1, max_size=5))
    return [TechEntry(p, "c") for p in picks]


@settings(max_examples=100, deadline=None)
@given(dictionaries(), st.lists(st.sampled_from(POOL + ["alphas", "betas", "x"]), max_size=10),
       st.lists(st.sampled_from(POOL), max_size=3))
def test_single_word_dictionaries_are_monotone(entries, words, tags):
    a = Article(url="u", title="", body=" ".join(words), tags=tuple(tags), published=DAY)
    small = document_tech_set(a, TechDictionary(entries[:-1]))
    large = document_tech_set(a, TechDictionary(entries))
    assert small <= large
