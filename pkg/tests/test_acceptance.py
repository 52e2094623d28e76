"""Acceptance criteria, one marked group per criterion.

The terminal summary prints one PASS/FAIL line per criterion (see conftest).
Run just this file with ``pytest tests/test_acceptance.py``.
"""

import json
import random
import time
import xml.etree.ElementTree as ET
from datetime import date
from pathlib import Path

import numpy as np
import pytest
import xmlschema

from conftest import ENDPOINT, FIXTURES, REPLAY, SCHEMA
from oracles import naive_cooccurrence, naive_mentions, normal_equation_fit
from techlens import DateRange, load_corpus
from techlens.cli import main
from techlens.cooc import (
    DEFAULT_STOPLIST,
    build_cooccurrence,
    linear_trend,
    minmax_normalize_by_group,
    other_tags,
    tag_matrix,
    tech_other_matrix,
)
from techlens.extract import document_tech_set, extract_mentions
from techlens.fetch import ReplayTransport, SkipReport, archive_url, fetch_tag_archive
from techlens.graph import (
    TECH,
    expanded_tech_graph,
    export_gexf,
    force_layout,
    graph_from_matrix,
    read_gexf,
)

SVG_NS = "{http://www.w3.org/2000/svg}"
WINDOW = DateRange(date(2020, 1, 1), date(2020, 4, 17))


def acceptance(number, title):
    return pytest.mark.acceptance(number, title)


# --- AC1 ---------------------------------------------------------------------------------

AC1 = acceptance(1, "co-occurrence equals brute-force recount on the 50-article corpus, under 1 s")


@AC1
def test_ac1_cooccurrence_oracle_and_runtime(corpus50, demo_dict):
    assert len(corpus50) == 50
    started = time.perf_counter()
    techs = lambda a: document_tech_set(a, demo_dict)
    others = lambda a: other_tags(a, demo_dict, DEFAULT_STOPLIST)
    raw = build_cooccurrence(corpus50, techs, others)
    symmetric = build_cooccurrence(corpus50, techs)
    bipartite = tech_other_matrix(corpus50, demo_dict, DEFAULT_STOPLIST)
    elapsed = time.perf_counter() - started

    tech_sets = [document_tech_set(a, demo_dict) for a in corpus50]
    other_sets = [other_tags(a, demo_dict, DEFAULT_STOPLIST) for a in corpus50]

    rows, cols, counts = naive_cooccurrence(tech_sets, other_sets)
    assert list(raw.row_labels) == rows and list(raw.col_labels) == cols
    assert raw.counts.tolist() == [[counts[r, c] for c in cols] for r in rows]

    kept_r = [r for r in rows if any(counts[r, c] for c in cols)]
    kept_c = [c for c in cols if any(counts[r, c] for r in rows)]
    assert list(bipartite.row_labels) == kept_r and list(bipartite.col_labels) == kept_c
    assert bipartite.counts.tolist() == [[counts[r, c] for c in kept_c] for r in kept_r]

    rows, cols, counts = naive_cooccurrence(tech_sets, tech_sets)
    assert symmetric.counts.tolist() == [[counts[r, c] for c in cols] for r in rows]
    assert elapsed < 1.0, f"co-occurrence took {elapsed:.3f} s"


# --- AC2 ---------------------------------------------------------------------------------

AC2 = acceptance(2, "extracted mentions equal the hand-labelled gold list on 20 articles")


@AC2
def test_ac2_gold_extraction(extraction20, demo_dict):
    gold = json.loads((FIXTURES / "extraction20_gold.json").read_text())
    by_url = {a.url: a for a in extraction20}
    expected = []
    for g in gold:
        if g["field"] == "tag":
            expected.append((g["url"], "tag", None, None, g["surface"], g["canonical"]))
            continue
        text = getattr(by_url[g["url"]], g["field"])
        start = -1
        for _ in range(g["nth"] + 1):
            start = text.find(g["surface"], start + 1)
        expected.append((g["url"], g["field"], start, start + len(g["surface"]), g["surface"], g["canonical"]))
    got = [(a.url, m.field, m.start, m.end, m.surface, m.entry.canonical)
           for a in extraction20 for m in extract_mentions(a, demo_dict)]
    assert got == expected
    surfaces = {m[4] for m in got}
    assert {"Blockchains", "Internet-of-Things"} <= surfaces
    assert "cloudy" not in surfaces


@AC2
def test_ac2_gold_agrees_with_naive_scan(extraction20, demo_dict):
    for a in extraction20:
        got = [(m.field, m.start, m.end, m.entry.canonical, m.surface) for m in extract_mentions(a, demo_dict)]
        assert got == naive_mentions(a, demo_dict)


# --- AC3 ---------------------------------------------------------------------------------

AC3 = acceptance(3, "min-max normalization stays in [0,1], hits 0 and 1, keeps each column's argmax")


def fixture_matrices(demo_dict):
    out = []
    for name in ("corpus12.jsonl", "corpus50.jsonl"):
        corpus = load_corpus(FIXTURES / name)
        out.append(tech_other_matrix(corpus, demo_dict, DEFAULT_STOPLIST))
        out.append(tag_matrix(corpus, demo_dict, DEFAULT_STOPLIST))
    return out


@AC3
def test_ac3_normalization_properties(demo_dict):
    for matrix in fixture_matrices(demo_dict):
        norm = minmax_normalize_by_group(matrix, "col")
        v, c = norm.values, matrix.counts
        assert ((v >= 0.0) & (v <= 1.0)).all()
        for j in range(c.shape[1]):
            col = c[:, j]
            if col.min() != col.max():
                assert v[:, j].min() == 0.0 and v[:, j].max() == 1.0
            assert np.argmax(v[:, j]) == np.argmax(col)
            assert set(np.flatnonzero(v[:, j] == 1.0)) >= set(np.flatnonzero(col == col.max())) or col.max() == 0


# --- AC4 ---------------------------------------------------------------------------------

AC4 = acceptance(4, "symmetric matrices are symmetric and bounded by document frequencies")


@AC4
def test_ac4_symmetric_structure(corpus12, corpus50, demo_dict):
    matrices = []
    for corpus in (corpus12, corpus50):
        matrices.append(tag_matrix(corpus, demo_dict, DEFAULT_STOPLIST))
        matrices.append(tag_matrix(corpus, demo_dict))
        matrices.append(build_cooccurrence(corpus, lambda a: document_tech_set(a, demo_dict)))
    for m in matrices:
        assert m.symmetric
        c = m.counts
        df = m.doc_freq()
        n = len(m.row_labels)
        for i in range(n):
            for j in range(n):
                assert c[i, j] == c[j, i]
                assert c[i, j] <= min(df[m.row_labels[i]], df[m.row_labels[j]])


# --- AC5 ---------------------------------------------------------------------------------

AC5 = acceptance(5, "linear trend matches closed-form least squares within 1e-9")


@AC5
def test_ac5_randomized_series():
    rng = random.Random(1729)
    for _ in range(10):
        n = rng.randint(3, 30)
        ys = [rng.randint(0, 500) for _ in range(n)]
        slope, intercept = linear_trend(ys)
        ref_slope, ref_intercept = normal_equation_fit(ys)
        assert abs(slope - ref_slope) <= 1e-9
        assert abs(intercept - ref_intercept) <= 1e-9


@AC5
def test_ac5_exact_cases():
    assert linear_trend([0, 1]) == (1.0, 0.0)
    assert linear_trend([3, 7]) == (4.0, 3.0)
    assert linear_trend([4, 4, 4]) == (0.0, 4.0)
    assert linear_trend([9] * 12) == (0.0, 9.0)


# --- AC6 ---------------------------------------------------------------------------------

AC6 = acceptance(6, "GEXF round trip, monotone thresholding, expansion handshake identity")

RELATED6 = {
    "blockchain": ["cryptocurrency", "fintech", "smart-contract"],
    "cryptocurrency": ["blockchain", "bitcoin", "fintech"],
    "iot": ["robot", "sensor", "cloud"],
    "robot": ["iot", "ai"],
    "cloud": ["iot", "ai", "saas"],
    "ai": ["robot", "cloud", "iot"],
}


@AC6
def test_ac6_round_trip(corpus12, corpus50, demo_dict, tmp_path):
    graphs = [expanded_tech_graph(list(RELATED6), RELATED6, demo_dict)]
    for corpus in (corpus12, corpus50):
        m = tag_matrix(corpus, demo_dict, DEFAULT_STOPLIST)
        graphs += [graph_from_matrix(m, min_edge_weight=w, dictionary=demo_dict) for w in (1, 2, 3)]
    for i, g in enumerate(graphs):
        path = tmp_path / f"g{i}.gexf"
        export_gexf(g, force_layout(g, iterations=50), path)
        assert read_gexf(path) == g


@AC6
def test_ac6_monotone_thresholding(corpus50, demo_dict):
    m = tag_matrix(corpus50, demo_dict, DEFAULT_STOPLIST)
    previous = None
    for w in range(1, 8):
        g = graph_from_matrix(m, min_edge_weight=w, dictionary=demo_dict)
        if previous is not None:
            assert set(g.labels) <= set(previous.labels)
            assert set(g.edges) <= set(previous.edges)
        previous = g


@AC6
def test_ac6_handshake(demo_dict):
    g = expanded_tech_graph(list(RELATED6), RELATED6, demo_dict)
    assert sum(n.weight for n in g.nodes) == 2 * len(g.edges) == 40
    rng = random.Random(6)
    pool = ["a", "b", "c", "d", "e", "x", "y"]
    for _ in range(25):
        seeds = rng.sample(pool[:5], rng.randint(1, 5))
        related = {s: rng.sample(pool, rng.randint(0, 5)) for s in seeds}
        g = expanded_tech_graph(seeds, related)
        assert sum(n.weight for n in g.nodes) == 2 * len(g.edges)


# --- AC7 / AC9 shared pipeline ------------------------------------------------------------

def write_config(directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    config = directory / "pipeline.toml"
    config.write_text(
        f'corpus = "{directory / "corpus.jsonl"}"\n'
        f'out_dir = "{directory / "out"}"\n'
        f'offline = "{REPLAY}"\n'
        f'endpoint = "{ENDPOINT}"\n'
        'from = "2020-01-01"\n'
        'to = "2020-04-17"\n'
        'seed = 42\n'
        'stoplist = ["covid", "covid-19", "coronavirus", "pandemic"]\n'
    )
    return config


def run_pipeline(directory: Path, corpus: Path | None = None) -> Path:
    """fetch -> analyze -> graph (+expansion) -> timeseries -> report, from one config file."""
    config = write_config(directory)
    if corpus is None:
        assert main(["fetch", "--config", str(config), "--tag", "covid-19"]) == 0
    else:
        (directory / "corpus.jsonl").write_bytes(corpus.read_bytes())
    assert main(["analyze", "--config", str(config), "--normalize", "minmax-col"]) == 0
    assert main(["graph", "--config", str(config), "--expand-related"]) == 0
    assert main(["timeseries", "--config", str(config), "--tag", "covid-19", "--trend"]) == 0
    assert main(["report", "--config", str(config)]) == 0
    return directory / "out"


def artifact_bytes(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix in (".csv", ".gexf", ".svg")}


# --- AC7 ---------------------------------------------------------------------------------

AC7 = acceptance(7, "two full pipeline runs produce byte-identical CSV/GEXF/SVG outputs")


@AC7
def test_ac7_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("TECHLENS_OFFLINE", "1")
    for source in (None, FIXTURES / "corpus12.jsonl"):
        label = "fetched" if source is None else "bundled"
        first = artifact_bytes(run_pipeline(tmp_path / f"{label}-1", source))
        second = artifact_bytes(run_pipeline(tmp_path / f"{label}-2", source))
        assert first.keys() == second.keys()
        assert {"tech_other.csv", "cooc_graph.gexf", "cooc_graph.svg", "expanded_graph.gexf",
                "tech_other.svg"} <= set(first)
        for name in first:
            assert first[name] == second[name], name


# --- AC8 ---------------------------------------------------------------------------------

AC8 = acceptance(8, "offline fetch rebuilds the expected corpus, obeys the page cap, opens no sockets")


@AC8
def test_ac8_expected_corpus(no_network, monkeypatch):
    monkeypatch.setenv("TECHLENS_OFFLINE", "1")
    corpus = fetch_tag_archive("covid-19", WINDOW, endpoint=ENDPOINT, transport=ReplayTransport(REPLAY))
    assert len(corpus) == 2
    assert [(a.title, a.published, a.tags) for a in corpus] == [
        ("Early warnings", date(2020, 1, 5), ("covid-19", "public-health")),
        ("Tracing apps compared", date(2020, 3, 10), ("covid-19", "surveillance", "internet-of-things")),
    ]
    assert no_network == []


@AC8
def test_ac8_page_cap(no_network, monkeypatch):
    monkeypatch.setenv("TECHLENS_OFFLINE", "1")
    transport = ReplayTransport(REPLAY)
    report = SkipReport()
    fetch_tag_archive("endless", WINDOW, endpoint=ENDPOINT, transport=transport, page_cap=4, report=report)
    assert report.page_cap_hit and report.pages_fetched == 4
    assert archive_url(ENDPOINT, "endless", 5) not in transport.requests
    assert no_network == []


@AC8
def test_ac8_cli_fetch_offline(no_network, monkeypatch, tmp_path):
    monkeypatch.setenv("TECHLENS_OFFLINE", "1")
    out = tmp_path / "c.jsonl"
    code = main(["fetch", "--tag", "covid-19", "--from", "2020-01-01", "--to", "2020-04-17", "--out", str(out),
                 "--offline", str(REPLAY), "--endpoint", ENDPOINT, "--out-dir", str(tmp_path)])
    assert code == 0 and len(load_corpus(out)) == 2
    # without a fixture directory the offline switch makes fetching fail rather than touch the network
    assert main(["fetch", "--tag", "covid-19", "--from", "2020-01-01", "--to", "2020-04-17",
                 "--out-dir", str(tmp_path)]) == 1
    assert no_network == []


# --- AC9 ---------------------------------------------------------------------------------

AC9 = acceptance(9, "figure-style heatmaps and graphs validate as GEXF 1.2 / SVG, under 5 s total")


@AC9
def test_ac9_end_to_end_figures(tmp_path, monkeypatch, demo_dict):
    monkeypatch.setenv("TECHLENS_OFFLINE", "1")
    started = time.perf_counter()
    out = run_pipeline(tmp_path, FIXTURES / "corpus12.jsonl")
    schema = xmlschema.XMLSchema(str(SCHEMA / "gexf.xsd"))
    for name in ("cooc_graph.gexf", "expanded_graph.gexf"):
        schema.validate(str(out / name))
    svgs = {}
    for name in ("tech_other.svg", "tech_other_minmax-col.svg", "cooc_graph.svg", "expanded_graph.svg"):
        root = ET.parse(out / name).getroot()
        assert root.tag == f"{SVG_NS}svg" and root.get("version") == "1.1"
        svgs[name] = root
    elapsed = time.perf_counter() - started

    # heatmaps: raw counts and column-normalized values
    for name in ("tech_other.svg", "tech_other_minmax-col.svg"):
        assert svgs[name].findall(f"{SVG_NS}rect[@class='cell']")

    # co-occurrence graph: undirected, stoplisted, node size follows tag usage
    corpus = load_corpus(FIXTURES / "corpus12.jsonl")
    g = read_gexf(out / "cooc_graph.gexf")
    assert not g.directed
    assert not set(g.labels) & DEFAULT_STOPLIST
    usage = tag_matrix(corpus, demo_dict, DEFAULT_STOPLIST).doc_freq()
    assert all(n.weight == usage[n.label] for n in g.nodes)
    svg_nodes = svgs["cooc_graph.svg"].findall(f".//{SVG_NS}circle")
    svg_g = graph_from_matrix(tag_matrix(corpus, demo_dict, DEFAULT_STOPLIST), min_edge_weight=2,
                              dictionary=demo_dict)
    radii = sorted(zip((n.weight for n in svg_g.nodes), (float(c.get("r")) for c in svg_nodes)))
    assert [r for _, r in radii] == sorted(r for _, r in radii)

    # expansion graph: directed, seeds are the technology nodes, handshake holds
    x = read_gexf(out / "expanded_graph.gexf")
    assert x.directed
    seeds = {n.label.replace(" ", "-") for n in g.nodes if n.kind == TECH}
    assert seeds <= set(x.labels)
    assert sum(n.weight for n in x.nodes) == 2 * len(x.edges)
    assert svgs["expanded_graph.svg"].find(f".//{SVG_NS}marker") is not None

    assert elapsed < 5.0, f"pipeline plus validation took {elapsed:.2f} s"
