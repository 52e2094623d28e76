"""Weighted tag graphs: construction from matrices, related-tag expansion, layout, export."""

from __future__ import annotations

import csv
import math
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from techlens.cooc import CoocMatrix, NormalizedMatrix
from techlens.corpus import normalize_tag
from techlens.errors import DomainError
from techlens.techdict import TechDictionary

TECH = "tech"
OTHER = "other"

GEXF_NS = "http://www.gexf.net/1.2draft"
VIZ_NS = "http://www.gexf.net/1.2draft/viz"
XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"

TECH_FILL = "#1f77b4"
OTHER_FILL = "#2ca02c"
KIND_RGB = {TECH: (31, 119, 180), OTHER: (44, 160, 44)}

ET.register_namespace("", GEXF_NS)
ET.register_namespace("viz", VIZ_NS)
ET.register_namespace("xsi", XSI_NS)


@dataclass(frozen=True)
class Node:
    label: str
    kind: str = OTHER
    weight: int = 0
    cluster: str | None = None


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    weight: int = 1


@dataclass(frozen=True)
class TagGraph:
    """Nodes sorted by label, edges sorted by endpoints.

    Undirected graphs store each pair once with ``a < b``; directed graphs
    store ``a -> b``.
    """

    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    directed: bool = False

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes, key=lambda n: n.label))
        edges = tuple(sorted(self.edges, key=lambda e: (e.a, e.b)))
        labels = [n.label for n in nodes]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate node labels")
        known = set(labels)
        pairs = set()
        for e in edges:
            if e.a not in known or e.b not in known:
                raise ValueError(f"edge {e.a!r}-{e.b!r} references a missing node")
            if e.a == e.b:
                raise ValueError(f"self-loop on {e.a!r}")
            if not self.directed and not e.a < e.b:
                raise ValueError(f"undirected edge must be stored with a < b: {e.a!r}, {e.b!r}")
            if e.weight < 1:
                raise ValueError(f"edge weight must be positive: {e}")
            if (e.a, e.b) in pairs:
                raise ValueError(f"duplicate edge {e.a!r}-{e.b!r}")
            pairs.add((e.a, e.b))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @property
    def labels(self) -> list[str]:
        return [n.label for n in self.nodes]

    def node(self, label: str) -> Node:
        for n in self.nodes:
            if n.label == label:
                return n
        raise KeyError(label)

    def edge_weight(self, a: str, b: str) -> int:
        if not self.directed and b < a:
            a, b = b, a
        for e in self.edges:
            if e.a == a and e.b == b:
                return e.weight
        return 0

    def degree(self) -> Counter:
        deg: Counter = Counter({n.label: 0 for n in self.nodes})
        for e in self.edges:
            deg[e.a] += 1
            deg[e.b] += 1
        return deg


@dataclass(frozen=True)
class Layout:
    positions: dict[str, tuple[float, float]] = field(default_factory=dict)
    seed: int = 42
    iterations: int = 0


def _classify_label(label: str, dictionary: TechDictionary | None):
    if dictionary is None:
        return None
    return dictionary.classify(normalize_tag(label))


def graph_from_matrix(
    matrix: CoocMatrix,
    node_weights: Mapping[str, int] | None = None,
    stoplist: Iterable[str] = (),
    min_edge_weight: int = 1,
    dictionary: TechDictionary | None = None,
) -> TagGraph:
    """Undirected graph of matrix entries at or above ``min_edge_weight``.

    Nodes are the labels left after the stoplist that keep at least one edge.
    Node weight comes from ``node_weights``, else the diagonal of a symmetric
    matrix, else the label's row or column total. Without a dictionary, row
    labels of a bipartite matrix are taken as technologies.
    """
    if min_edge_weight < 1:
        raise DomainError(f"min_edge_weight must be >= 1, got {min_edge_weight}")
    stop = {normalize_tag(s) for s in stoplist}
    counts = matrix.counts
    pairs: dict[tuple[str, str], int] = {}
    for i, row in enumerate(matrix.row_labels):
        if normalize_tag(row) in stop:
            continue
        cols = range(i + 1, len(matrix.col_labels)) if matrix.symmetric else range(len(matrix.col_labels))
        for j in cols:
            col = matrix.col_labels[j]
            w = int(counts[i, j])
            if row == col or w < min_edge_weight or normalize_tag(col) in stop:
                continue
            pairs.setdefault((min(row, col), max(row, col)), w)

    if matrix.symmetric:
        fallback = {label: int(counts[i, i]) for i, label in enumerate(matrix.row_labels)}
    else:
        fallback = {label: int(v) for label, v in zip(matrix.col_labels, counts.sum(axis=0))}
        fallback.update({label: int(v) for label, v in zip(matrix.row_labels, counts.sum(axis=1))})
    row_set = set(matrix.row_labels)

    nodes = []
    for label in sorted({x for pair in pairs for x in pair}):
        entry = _classify_label(label, dictionary)
        if dictionary is not None:
            kind = TECH if entry is not None else OTHER
        else:
            kind = TECH if (not matrix.symmetric and label in row_set) else OTHER
        weight = node_weights.get(label, 0) if node_weights is not None else fallback.get(label, 0)
        nodes.append(Node(label, kind, int(weight), entry.cluster if entry is not None else None))
    edges = [Edge(a, b, w) for (a, b), w in pairs.items()]
    return TagGraph(tuple(nodes), tuple(edges), directed=False)


def expanded_tech_graph(
    seed_techs: Sequence[str],
    related: Mapping[str, Sequence[str]],
    dictionary: TechDictionary | None = None,
) -> TagGraph:
    """Directed graph of technologies and the tags the platform lists as related.

    Each seed gets an edge to every tag in its related list. Each related list
    is then treated as a pseudo-document: two seeds listed together in ``c``
    lists gain edges both ways weighted ``c`` (added onto an existing
    relation edge when there is one). Node weight is in-degree plus out-degree.
    """
    seeds = list(dict.fromkeys(normalize_tag(s) for s in seed_techs if normalize_tag(s)))
    lists: dict[str, list[str]] = {}
    for seed in seeds:
        raw = related.get(seed)
        if raw is None:
            raw = next((v for k, v in related.items() if normalize_tag(k) == seed), None)
        if raw is None:
            raise DomainError(f"no related-tag list for seed {seed!r}")
        lists[seed] = list(dict.fromkeys(t for t in (normalize_tag(x) for x in raw) if t))

    weights: dict[tuple[str, str], int] = {}
    for seed, tags in lists.items():
        for tag in tags:
            if tag != seed:
                weights[(seed, tag)] = 1

    seed_set = set(seeds)
    together: Counter = Counter()
    for tags in lists.values():
        present = sorted(seed_set.intersection(tags))
        together.update(combinations(present, 2))
    for (u, v), c in together.items():
        weights[(u, v)] = weights.get((u, v), 0) + c
        weights[(v, u)] = weights.get((v, u), 0) + c

    labels = set(seeds).union(*lists.values()) if lists else set(seeds)
    degree = Counter({label: 0 for label in labels})
    for a, b in weights:
        degree[a] += 1
        degree[b] += 1
    nodes = []
    for label in labels:
        entry = _classify_label(label, dictionary)
        kind = TECH if (label in seed_set or entry is not None) else OTHER
        nodes.append(Node(label, kind, degree[label], entry.cluster if entry is not None else None))
    edges = [Edge(a, b, w) for (a, b), w in weights.items()]
    return TagGraph(tuple(nodes), tuple(edges), directed=True)


def force_layout(graph: TagGraph, iterations: int = 500, seed: int = 42) -> Layout:
    """Weighted Fruchterman-Reingold spring embedder with linear cooling.

    Nodes start evenly spaced on the unit circle, rotated by a seeded phase.
    Attraction along an edge is proportional to its weight relative to the
    heaviest edge, so frequently co-cited tags end up close together. The
    result is centered on the origin.
    """
    if iterations < 1:
        raise DomainError(f"iterations must be >= 1, got {iterations}")
    labels = graph.labels
    n = len(labels)
    if n == 0:
        return Layout({}, seed, iterations)
    if n == 1:
        return Layout({labels[0]: (0.0, 0.0)}, seed, iterations)

    index = {label: i for i, label in enumerate(labels)}
    w = np.zeros((n, n))
    for e in graph.edges:
        i, j = index[e.a], index[e.b]
        w[i, j] += e.weight
        w[j, i] += e.weight
    if w.max() > 0:
        w /= w.max()

    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2 * math.pi) + 2 * math.pi * np.arange(n) / n
    pos = np.column_stack([np.cos(angles), np.sin(angles)])

    k = math.sqrt(math.pi / n)
    gravity = 0.05
    t0 = 0.1
    for it in range(iterations):
        temperature = t0 * (1.0 - it / iterations)
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((delta**2).sum(axis=-1))
        np.fill_diagonal(dist, 1.0)
        dist = np.maximum(dist, 1e-9)
        # per-pair scalar: repulsion k^2/d, attraction w d^2/k, both along delta/d
        coeff = k * k / (dist * dist) - w * dist / k
        np.fill_diagonal(coeff, 0.0)
        force = (delta * coeff[:, :, None]).sum(axis=1) - gravity * pos
        length = np.sqrt((force**2).sum(axis=1))
        step = np.minimum(length, temperature) / np.maximum(length, 1e-12)
        pos = pos + force * step[:, None]
    pos = pos - pos.mean(axis=0)
    return Layout({label: (float(x), float(y)) for label, (x, y) in zip(labels, pos)}, seed, iterations)


def _gexf_tag(name: str) -> str:
    return f"{{{GEXF_NS}}}{name}"


def _viz_tag(name: str) -> str:
    return f"{{{VIZ_NS}}}{name}"


def gexf_tree(graph: TagGraph, layout: Layout | None = None) -> ET.ElementTree:
    root = ET.Element(_gexf_tag("gexf"), {
        "version": "1.2",
        f"{{{XSI_NS}}}schemaLocation": f"{GEXF_NS} http://www.gexf.net/1.2draft/gexf.xsd",
    })
    meta = ET.SubElement(root, _gexf_tag("meta"))
    ET.SubElement(meta, _gexf_tag("creator")).text = "techlens"
    ET.SubElement(meta, _gexf_tag("description")).text = (
        "tag relatedness graph" if graph.directed else "tag co-occurrence graph"
    )
    g = ET.SubElement(root, _gexf_tag("graph"), {
        "mode": "static",
        "defaultedgetype": "directed" if graph.directed else "undirected",
    })
    attrs = ET.SubElement(g, _gexf_tag("attributes"), {"class": "node", "mode": "static"})
    for attr_id, attr_type in (("kind", "string"), ("cluster", "string"), ("weight", "integer")):
        ET.SubElement(attrs, _gexf_tag("attribute"), {"id": attr_id, "title": attr_id, "type": attr_type})

    max_weight = max((n.weight for n in graph.nodes), default=0) or 1
    ids = {}
    nodes_el = ET.SubElement(g, _gexf_tag("nodes"), {"count": str(len(graph.nodes))})
    for i, node in enumerate(graph.nodes):
        ids[node.label] = str(i)
        el = ET.SubElement(nodes_el, _gexf_tag("node"), {"id": str(i), "label": node.label})
        values = ET.SubElement(el, _gexf_tag("attvalues"))
        ET.SubElement(values, _gexf_tag("attvalue"), {"for": "kind", "value": node.kind})
        if node.cluster is not None:
            ET.SubElement(values, _gexf_tag("attvalue"), {"for": "cluster", "value": node.cluster})
        ET.SubElement(values, _gexf_tag("attvalue"), {"for": "weight", "value": str(node.weight)})
        r, gr, b = KIND_RGB.get(node.kind, KIND_RGB[OTHER])
        ET.SubElement(el, _viz_tag("color"), {"r": str(r), "g": str(gr), "b": str(b)})
        if layout is not None:
            x, y = layout.positions[node.label]
            ET.SubElement(el, _viz_tag("position"), {"x": f"{x:.6f}", "y": f"{y:.6f}", "z": "0.0"})
        ET.SubElement(el, _viz_tag("size"), {"value": f"{4 + 16 * math.sqrt(node.weight / max_weight):.6f}"})
    edges_el = ET.SubElement(g, _gexf_tag("edges"), {"count": str(len(graph.edges))})
    for i, edge in enumerate(graph.edges):
        ET.SubElement(edges_el, _gexf_tag("edge"), {
            "id": str(i),
            "source": ids[edge.a],
            "target": ids[edge.b],
            "weight": str(edge.weight),
        })
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return tree


def export_gexf(graph: TagGraph, layout: Layout | None, path: str | Path) -> None:
    if layout is not None:
        missing = [label for label in graph.labels if label not in layout.positions]
        if missing:
            raise DomainError(f"layout has no position for {missing[0]!r}")
    with open(path, "wb") as fh:
        gexf_tree(graph, layout).write(fh, encoding="UTF-8", xml_declaration=True)
        fh.write(b"\n")


def read_gexf(path: str | Path) -> TagGraph:
    """Read a GEXF file written by :func:`export_gexf` back into a TagGraph."""
    root = ET.parse(path).getroot()
    g = root.find(_gexf_tag("graph"))
    if g is None:
        raise ValueError(f"{path}: no graph element")
    directed = g.get("defaultedgetype", "undirected") == "directed"
    labels = {}
    nodes = []
    for el in g.iter(_gexf_tag("node")):
        label = el.get("label", el.get("id"))
        labels[el.get("id")] = label
        values = {v.get("for"): v.get("value") for v in el.iter(_gexf_tag("attvalue"))}
        nodes.append(Node(label, values.get("kind", OTHER), int(values.get("weight", 0)), values.get("cluster")))
    edges = []
    for el in g.iter(_gexf_tag("edge")):
        a, b = labels[el.get("source")], labels[el.get("target")]
        if not directed and b < a:
            a, b = b, a
        edges.append(Edge(a, b, int(float(el.get("weight", "1")))))
    return TagGraph(tuple(nodes), tuple(edges), directed=directed)


def read_gexf_positions(path: str | Path) -> dict[str, tuple[float, float]]:
    root = ET.parse(path).getroot()
    positions = {}
    for el in root.iter(_gexf_tag("node")):
        pos = el.find(_viz_tag("position"))
        if pos is not None:
            positions[el.get("label", el.get("id"))] = (float(pos.get("x")), float(pos.get("y")))
    return positions


def write_edge_csv(graph: TagGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["a", "b", "weight"])
        for e in graph.edges:
            writer.writerow([e.a, e.b, e.weight])


# --- SVG -------------------------------------------------------------------

_RAMP_LOW = (247, 251, 255)
_RAMP_HIGH = (8, 48, 107)


def ramp_color(t: float) -> str:
    """Single-hue blue ramp; darker for larger ``t`` in [0, 1]."""
    t = min(max(t, 0.0), 1.0)
    rgb = (round(lo + (hi - lo) * t) for lo, hi in zip(_RAMP_LOW, _RAMP_HIGH))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def export_svg_heatmap(matrix: CoocMatrix | NormalizedMatrix, path: str | Path, title: str = "") -> None:
    """Annotated heatmap; raw counts are shaded relative to the matrix maximum."""
    if isinstance(matrix, CoocMatrix):
        data = matrix.counts
        peak = int(data.max()) if data.size else 0
        shade = (lambda v: v / peak if peak else 0.0)
        fmt = (lambda v: str(int(v)))
    else:
        data = matrix.values
        shade = float
        fmt = (lambda v: f"{v:.2f}")
    if data.size == 0:
        raise DomainError("cannot draw a heatmap of an empty matrix")

    cell = 40
    char_w = 6.6
    left = 10 + math.ceil(char_w * max(len(l) for l in matrix.row_labels))
    top = 20 + (18 if title else 0) + math.ceil(char_w * max(len(l) for l in matrix.col_labels))
    width = left + cell * len(matrix.col_labels) + 10
    height = top + cell * len(matrix.row_labels) + 10

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text class="title" x="{left}" y="16" font-size="13">{_esc(title)}</text>')
    for j, label in enumerate(matrix.col_labels):
        x = left + cell * j + cell // 2
        out.append(
            f'<text class="col-label" x="{x}" y="{top - 6}" transform="rotate(-90 {x} {top - 6})" '
            f'dominant-baseline="middle">{_esc(label)}</text>'
        )
    for i, label in enumerate(matrix.row_labels):
        y = top + cell * i + cell // 2
        out.append(
            f'<text class="row-label" x="{left - 6}" y="{y}" text-anchor="end" '
            f'dominant-baseline="middle">{_esc(label)}</text>'
        )
    for i, row in enumerate(data.tolist()):
        for j, v in enumerate(row):
            t = shade(v)
            x, y = left + cell * j, top + cell * i
            out.append(
                f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{ramp_color(t)}" stroke="#ffffff"/>'
            )
            ink = "#ffffff" if t > 0.5 else "#000000"
            out.append(
                f'<text class="value" x="{x + cell // 2}" y="{y + cell // 2}" text-anchor="middle" '
                f'dominant-baseline="middle" fill="{ink}">{fmt(v)}</text>'
            )
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def export_svg_graph(graph: TagGraph, layout: Layout, path: str | Path, size: int = 800) -> None:
    """Static node-link drawing: edges under nodes, radius and stroke scale with weight."""
    missing = [label for label in graph.labels if label not in layout.positions]
    if missing:
        raise DomainError(f"layout has no position for {missing[0]!r}")
    margin = 60
    xs = [layout.positions[l][0] for l in graph.labels]
    ys = [layout.positions[l][1] for l in graph.labels]
    span = max((max(xs) - min(xs)) if xs else 0.0, (max(ys) - min(ys)) if ys else 0.0)
    scale = (size - 2 * margin) / span if span > 0 else 0.0
    cx = (max(xs) + min(xs)) / 2 if xs else 0.0
    cy = (max(ys) + min(ys)) / 2 if ys else 0.0

    def project(label: str) -> tuple[float, float]:
        x, y = layout.positions[label]
        return size / 2 + (x - cx) * scale, size / 2 - (y - cy) * scale

    max_node = max((n.weight for n in graph.nodes), default=0) or 1
    max_edge = max((e.weight for e in graph.edges), default=0) or 1
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="10">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>',
    ]
    if graph.directed:
        out += [
            "<defs>",
            '<marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" '
            'orient="auto"><path d="M 0 0 L 10 5 L 0 10 z" fill="#999999"/></marker>',
            "</defs>",
        ]
    out.append('<g class="edges" stroke="#999999" stroke-opacity="0.6">')
    marker = ' marker-end="url(#arrow)"' if graph.directed else ""
    for e in graph.edges:
        x1, y1 = project(e.a)
        x2, y2 = project(e.b)
        out.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke-width="{0.5 + 3.5 * e.weight / max_edge:.2f}"{marker}/>'
        )
    out.append("</g>")
    out.append('<g class="nodes" stroke="#ffffff" stroke-width="1">')
    for n in graph.nodes:
        x, y = project(n.label)
        fill = TECH_FILL if n.kind == TECH else OTHER_FILL
        radius = 4 + 16 * math.sqrt(n.weight / max_node)
        out.append(f'<circle class="node {n.kind}" cx="{x:.2f}" cy="{y:.2f}" r="{radius:.2f}" fill="{fill}"/>')
    out.append("</g>")
    out.append('<g class="labels" fill="#222222">')
    for n in graph.nodes:
        x, y = project(n.label)
        radius = 4 + 16 * math.sqrt(n.weight / max_node)
        out.append(f'<text x="{x + radius + 2:.2f}" y="{y + 3:.2f}">{_esc(n.label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
