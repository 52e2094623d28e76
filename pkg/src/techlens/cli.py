"""Command line entry point: ``techlens fetch|analyze|graph|timeseries|report``.

Settings resolve in three layers: built-in defaults, then a TOML config file
(``--config``), then explicit flags. A config key has the same name as the
flag's destination, e.g. ``out_dir``, ``min_edge_weight``, ``stoplist``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from techlens import cooc, extract, graph
from techlens.corpus import Corpus, DateRange, filter_by_date, load_corpus, normalize_tag, save_corpus
from techlens.errors import DomainError, TechlensError
from techlens.fetch import (
    DEFAULT_ENDPOINT,
    DEFAULT_PAGE_CAP,
    FetchPolicy,
    SkipReport,
    fetch_related_tags,
    fetch_tag_archive,
    make_transport,
)
from techlens.techdict import TechDictionary, demo_dictionary_path, load_dictionary

log = logging.getLogger("techlens")

REPORT_FILE = "run_report.json"
NORMALIZE_CHOICES = ("minmax-col", "minmax-row")


class UsageError(Exception):
    pass


@dataclass
class PipelineConfig:
    corpus: str | None = None
    source_tag: str | None = None
    date_from: str | None = None
    date_to: str | None = None
    endpoint: str = DEFAULT_ENDPOINT
    dict: str | None = None
    stoplist: list[str] = field(default_factory=lambda: sorted(cooc.DEFAULT_STOPLIST))
    granularity: str = "month"
    min_edge_weight: int | None = None
    seed: int = 42
    iterations: int = 500
    out_dir: str = "out"
    offline: str | None = None
    jobs: int = 1
    page_cap: int = DEFAULT_PAGE_CAP
    skip_unparseable: bool = False
    min_interval: float = 1.0
    retries: int = 3
    normalize: str | None = None
    out: str | None = None
    matrix: str | None = None
    expand_related: bool = False
    series_tag: str | None = None
    tech_articles: bool = False
    trend: bool = False

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    def date_range(self) -> DateRange | None:
        if self.date_from is None and self.date_to is None:
            return None
        if self.date_from is None or self.date_to is None:
            raise UsageError("--from and --to must be given together")
        try:
            return DateRange.parse(self.date_from, self.date_to)
        except ValueError as exc:
            raise UsageError(f"bad date range: {exc}") from None

    def dictionary(self) -> TechDictionary:
        return load_dictionary(self.dict or demo_dictionary_path())

    def policy(self) -> FetchPolicy:
        return FetchPolicy(
            max_concurrent_requests=max(self.jobs, 1),
            min_request_interval=self.min_interval,
            max_retries=self.retries,
        )

    def output(self, name: str) -> Path:
        path = Path(self.out_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path / name


def load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"invalid config {path}: {exc}") from None
    data = {k.replace("-", "_"): v for k, v in data.items()}
    aliases = {"from": "date_from", "to": "date_to", "tag": "source_tag", "min_weight": "min_edge_weight"}
    data = {aliases.get(k, k): v for k, v in data.items()}
    unknown = set(data) - PipelineConfig.keys()
    if unknown:
        raise UsageError(f"unknown config keys in {path}: {', '.join(sorted(unknown))}")
    return data


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    flags = {k: v for k, v in vars(args).items() if k in PipelineConfig.keys()}
    merged = {}
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    merged.update(flags)
    if isinstance(merged.get("stoplist"), str):
        merged["stoplist"] = [s for s in merged["stoplist"].split(",") if s.strip()]
    config = PipelineConfig(**merged)
    if config.granularity not in cooc.GRANULARITIES:
        raise UsageError(f"unsupported granularity {config.granularity!r}")
    if config.normalize is not None and config.normalize not in NORMALIZE_CHOICES:
        raise UsageError(f"unsupported normalization {config.normalize!r}")
    if config.min_edge_weight is not None and config.min_edge_weight < 1:
        raise UsageError("--min-weight must be >= 1")
    return config


# --- run report --------------------------------------------------------------


class RunReport:
    """Per-stage counts and timings, persisted as ``run_report.json`` in the output directory."""

    def __init__(self, config: PipelineConfig):
        self.path = Path(config.out_dir) / REPORT_FILE
        self.data: dict = {}
        if self.path.is_file():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))

    def update(self, stage: str, **values) -> None:
        self.data[stage] = values

    @contextmanager
    def timed(self, stage: str):
        started = time.perf_counter()
        yield
        self.data.setdefault("wall_time_s", {})[stage] = round(time.perf_counter() - started, 4)

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def flatten(record: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def render_report(data: dict) -> str:
    lines = []
    fetch = data.get("fetch")
    analyze = data.get("analyze")
    if fetch:
        lines.append(
            f"Retrieved {fetch['articles']} articles tagged {fetch['tag']!r} "
            f"from {fetch['from']} to {fetch['to']} ({fetch['skipped']} skipped)."
        )
    if analyze:
        total, with_tech = analyze["articles"], analyze["tech_articles"]
        share = 100.0 * with_tech / total if total else 0.0
        lines.append(
            f"Found a total of {total} articles, of which {with_tech} ({share:.2f}%) "
            f"contain at least one technology from the dictionary."
        )
        rows, cols = analyze["tech_other_shape"]
        lines.append(f"Technology x other-tag matrix: {rows} x {cols}.")
    graph_stage = data.get("graph")
    if graph_stage:
        lines.append(
            f"Co-occurrence graph: {graph_stage['nodes']} nodes, {graph_stage['edges']} edges "
            f"(min edge weight {graph_stage['min_edge_weight']})."
        )
        if "expanded_nodes" in graph_stage:
            lines.append(
                f"Related-tag graph: {graph_stage['expanded_nodes']} nodes, "
                f"{graph_stage['expanded_edges']} directed edges."
            )
    series = data.get("timeseries")
    if series:
        line = f"Series {series['name']!r} ({series['granularity']}): {series['buckets']} buckets, {series['total']} articles"
        if series.get("slope") is not None:
            line += f", trend slope {series['slope']:.4f} per bucket"
        lines.append(line + ".")
    timings = data.get("wall_time_s", {})
    if timings:
        lines.append("Wall time: " + ", ".join(f"{k} {v:.2f}s" for k, v in sorted(timings.items())))
    if not lines:
        lines.append("No stages recorded yet.")
    return "\n".join(lines) + "\n"


# --- subcommands -------------------------------------------------------------


def _require_corpus(config: PipelineConfig) -> Corpus:
    if not config.corpus:
        raise UsageError("no corpus file given (--corpus or 'corpus' in the config)")
    corpus = load_corpus(config.corpus)
    date_range = config.date_range()
    if date_range is not None:
        corpus = filter_by_date(corpus, date_range)
    return corpus


def cmd_fetch(config: PipelineConfig) -> int:
    if not config.source_tag:
        raise UsageError("fetch needs --tag")
    tag = normalize_tag(config.source_tag)
    date_range = config.date_range()
    if date_range is None:
        raise UsageError("fetch needs --from and --to")
    report = RunReport(config)
    skips = SkipReport()
    with report.timed("fetch"):
        policy = config.policy()
        transport = make_transport(policy, config.offline)
        corpus = fetch_tag_archive(
            tag, date_range, policy, endpoint=config.endpoint, transport=transport,
            page_cap=config.page_cap, skip_unparseable=config.skip_unparseable, report=skips,
        )
        out = Path(config.out) if config.out else (Path(config.corpus) if config.corpus else config.output("corpus.jsonl"))
        out.parent.mkdir(parents=True, exist_ok=True)
        save_corpus(corpus, out)
    if not len(corpus):
        log.warning("no articles found for tag %r in %s..%s", tag, date_range.start, date_range.end)
    report.update("fetch", tag=tag, articles=len(corpus), skipped=skips.skipped, output=str(out),
                  **{"from": date_range.start.isoformat(), "to": date_range.end.isoformat()},
                  **skips.to_record())
    report.save()
    print(f"wrote {len(corpus)} articles to {out}")
    return 0


def cmd_analyze(config: PipelineConfig) -> int:
    corpus = _require_corpus(config)
    dictionary = config.dictionary()
    report = RunReport(config)
    with report.timed("analyze"):
        articles = list(corpus)
        mentions = [m for a in articles for m in extract.extract_mentions(a, dictionary)]
        extract.write_mentions(mentions, config.output("mentions.jsonl"))
        stats = extract.corpus_tech_stats(articles, dictionary, jobs=config.jobs)
        extract.write_stats(stats, config.output("stats.json"))

        matrix = cooc.tech_other_matrix(articles, dictionary, config.stoplist, jobs=config.jobs)
        cooc.write_matrix_csv(matrix, config.output("tech_other.csv"))
        tags = cooc.tag_matrix(articles, dictionary, config.stoplist, jobs=config.jobs)
        cooc.write_matrix_csv(tags, config.output("tag_cooc.csv"))
        series = cooc.tech_stats_series(articles, dictionary, config.granularity, jobs=config.jobs)
        cooc.write_series_csv(series, config.output(f"tech_articles_{config.granularity}.csv"))

        if matrix.counts.size:
            graph.export_svg_heatmap(matrix, config.output("tech_other.svg"), title="Tech tags x other tags")
            if config.normalize:
                axis = config.normalize.split("-")[1]
                normalized = cooc.minmax_normalize_by_group(matrix, axis)
                cooc.write_matrix_csv(normalized, config.output(f"tech_other_{config.normalize}.csv"))
                graph.export_svg_heatmap(
                    normalized, config.output(f"tech_other_{config.normalize}.svg"),
                    title=f"Tech tags x other tags, min-max by {axis}",
                )
        else:
            log.warning("technology x other-tag matrix is empty; heatmaps skipped")
    if not len(corpus):
        log.warning("corpus is empty")
    report.update("analyze", articles=stats.total_articles, tech_articles=stats.articles_with_tech,
                  mentions=len(mentions), tech_other_shape=list(matrix.shape),
                  tag_cooc_size=len(tags.row_labels), normalize=config.normalize)
    report.save()
    print(f"{stats.total_articles} articles, {stats.articles_with_tech} with technologies; "
          f"matrix {matrix.shape[0]}x{matrix.shape[1]}")
    return 0


def _export_graph(g: graph.TagGraph, config: PipelineConfig, stem: str, svg_graph: graph.TagGraph) -> None:
    layout = graph.force_layout(g, iterations=config.iterations, seed=config.seed)
    graph.export_gexf(g, layout, config.output(f"{stem}.gexf"))
    graph.write_edge_csv(g, config.output(f"{stem}_edges.csv"))
    svg_layout = layout if svg_graph is g else graph.force_layout(svg_graph, config.iterations, config.seed)
    graph.export_svg_graph(svg_graph, svg_layout, config.output(f"{stem}.svg"))


def cmd_graph(config: PipelineConfig) -> int:
    dictionary = config.dictionary()
    if config.matrix and config.corpus:
        raise UsageError("give either --matrix or --corpus, not both")
    if config.matrix:
        matrix = cooc.read_matrix_csv(config.matrix)
    else:
        matrix = cooc.tag_matrix(_require_corpus(config), dictionary, config.stoplist, jobs=config.jobs)

    export_weight = config.min_edge_weight or 1
    visual_weight = config.min_edge_weight or 2
    report = RunReport(config)
    with report.timed("graph"):
        build = lambda w: graph.graph_from_matrix(matrix, stoplist=config.stoplist, min_edge_weight=w,
                                                  dictionary=dictionary)
        g = build(export_weight)
        svg_g = g if visual_weight == export_weight else build(visual_weight)
        if not g.edges:
            log.warning("no edges at min edge weight %d; writing empty graph", export_weight)
        _export_graph(g, config, "cooc_graph", svg_g)
        stage = {"nodes": len(g.nodes), "edges": len(g.edges), "min_edge_weight": export_weight,
                 "svg_nodes": len(svg_g.nodes), "svg_edges": len(svg_g.edges),
                 "svg_min_edge_weight": visual_weight}

        if config.expand_related:
            seeds = [n.label for n in g.nodes if n.kind == graph.TECH]
            transport = make_transport(config.policy(), config.offline)
            related = {}
            for label in seeds:
                tag = normalize_tag(label)
                related[tag] = fetch_related_tags(tag, config.policy(), config.endpoint, transport)
            config.output("related_tags.json").write_text(
                json.dumps(related, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
            expanded = graph.expanded_tech_graph(list(related), related, dictionary)
            _export_graph(expanded, config, "expanded_graph", expanded)
            stage.update(expanded_nodes=len(expanded.nodes), expanded_edges=len(expanded.edges))
    report.update("graph", **stage)
    report.save()
    print(f"graph: {stage['nodes']} nodes, {stage['edges']} edges")
    return 0


def cmd_timeseries(config: PipelineConfig) -> int:
    if bool(config.series_tag) == bool(config.tech_articles):
        raise UsageError("timeseries needs exactly one of --tag or --tech-articles")
    corpus = _require_corpus(config)
    report = RunReport(config)
    with report.timed("timeseries"):
        if config.tech_articles:
            name = "tech-articles"
            series = cooc.tech_stats_series(corpus, config.dictionary(), config.granularity, jobs=config.jobs)
        else:
            name = normalize_tag(config.series_tag)
            series = cooc.tag_timeseries(corpus, name, config.granularity)
        stem = f"series_{name}_{config.granularity}"
        cooc.write_series_csv(series, config.output(f"{stem}.csv"))
        slope = intercept = None
        if config.trend:
            if len(series) >= 2:
                slope, intercept = cooc.linear_trend(series)
                config.output(f"{stem}_trend.json").write_text(json.dumps(
                    {"series": name, "granularity": config.granularity, "points": len(series),
                     "slope": slope, "intercept": intercept}, indent=2) + "\n", encoding="utf-8")
            else:
                log.warning("series %r has %d point(s); no trend fitted", name, len(series))
    if not len(series):
        log.warning("no articles carry %r", name)
    report.update("timeseries", name=name, granularity=config.granularity, buckets=len(series),
                  total=sum(series.counts), slope=slope, intercept=intercept)
    report.save()
    print(f"{name}: {len(series)} buckets, {sum(series.counts)} articles")
    return 0


def cmd_report(config: PipelineConfig) -> int:
    path = Path(config.out_dir) / REPORT_FILE
    if not path.is_file():
        raise TechlensError(f"no run report at {path}; run another subcommand first")
    data = json.loads(path.read_text(encoding="utf-8"))
    text = render_report(data)
    config.output("report.txt").write_text(text, encoding="utf-8")
    config.output("report_flat.json").write_text(
        json.dumps(flatten(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    sys.stdout.write(text)
    return 0


COMMANDS = {
    "fetch": cmd_fetch,
    "analyze": cmd_analyze,
    "graph": cmd_graph,
    "timeseries": cmd_timeseries,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="TOML config file; flags override its values")
    common.add_argument("--dict", help="technology dictionary CSV (default: bundled demo dictionary)")
    common.add_argument("--out-dir", dest="out_dir", help="output directory (default: out)")
    common.add_argument("--offline", metavar="DIR", help="replay recorded responses from DIR")
    common.add_argument("--jobs", type=int, help="parallel workers for fetching and extraction")
    common.add_argument("--seed", type=int, help="layout seed (default 42)")
    common.add_argument("--stoplist", help="comma-separated tags to exclude")
    common.add_argument("--from", dest="date_from", metavar="YYYY-MM-DD")
    common.add_argument("--to", dest="date_to", metavar="YYYY-MM-DD")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="techlens", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fetch", parents=[common], argument_default=S, help="scrape a tag archive into a corpus file")
    p.add_argument("--tag", dest="source_tag")
    p.add_argument("--out", help="corpus file to write")
    p.add_argument("--endpoint", help=f"platform base URL (default {DEFAULT_ENDPOINT})")
    p.add_argument("--page-cap", dest="page_cap", type=int)
    p.add_argument("--skip-unparseable", dest="skip_unparseable", action="store_true")
    p.add_argument("--min-interval", dest="min_interval", type=float, help="seconds between requests per host")
    p.add_argument("--retries", type=int)

    p = sub.add_parser("analyze", parents=[common], argument_default=S,
                       help="extract technologies, build matrices and heatmaps")
    p.add_argument("--corpus")
    p.add_argument("--normalize", choices=NORMALIZE_CHOICES)
    p.add_argument("--granularity", choices=cooc.GRANULARITIES)

    p = sub.add_parser("graph", parents=[common], argument_default=S, help="co-occurrence and related-tag graphs")
    p.add_argument("--corpus")
    p.add_argument("--matrix", help="symmetric tag matrix CSV instead of a corpus")
    p.add_argument("--min-weight", dest="min_edge_weight", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--expand-related", dest="expand_related", action="store_true")
    p.add_argument("--endpoint")

    p = sub.add_parser("timeseries", parents=[common], argument_default=S, help="per-bucket tag counts and trend")
    p.add_argument("--corpus")
    p.add_argument("--tag", dest="series_tag")
    p.add_argument("--tech-articles", dest="tech_articles", action="store_true",
                   help="count articles mentioning any technology instead of a tag")
    p.add_argument("--granularity", choices=cooc.GRANULARITIES)
    p.add_argument("--trend", action="store_true")

    sub.add_parser("report", parents=[common], argument_default=S, help="render the run report")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](config)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"techlens: error: {exc}", file=sys.stderr)
        return 2
    except (TechlensError, DomainError, OSError, ValueError) as exc:
        print(f"techlens: fatal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
