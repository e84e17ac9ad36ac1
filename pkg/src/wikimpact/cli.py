"""Command-line front end.

Subcommands: rank, count, merge-pageviews, parser-check, bench-report.
Flags are long-form only; ``rank`` also accepts the traffic dataset and
project tag as positional arguments after the dump. Configuration precedence
is flags over environment (WIKIMPACT_ prefix) over defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import bench, chunked_io, measures, pipeline, wikidump
from .errors import WikimpactError
from .model import ANONYMOUS_USERNAME

ENV_PARALLELISM = "WIKIMPACT_PARALLELISM"


def _default_parallelism() -> int:
    raw = os.environ.get(ENV_PARALLELISM)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


def _add_parser_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--parser", choices=("auto",) + wikidump.PARSER_VARIANTS, default="auto",
        help="dump parser variant; auto picks by compressed size",
    )
    sub.add_argument(
        "--prefilter-regex", action="append", default=[], metavar="EXPR",
        help="regex the raw page record must fully match (repeatable)",
    )
    sub.add_argument(
        "--prefilter-path", action="append", default=[], metavar="EXPR",
        help="path selection that must match at least one node (repeatable)",
    )
    sub.add_argument(
        "--prefilter-query", action="append", default=[], metavar="EXPR",
        help="query-style selection that must match at least one node (repeatable)",
    )
    sub.add_argument(
        "--parallelism", type=int, default=None,
        help=f"worker count (default: ${ENV_PARALLELISM} or 1)",
    )


def _collect_prefilters(args, include_default_ns0: bool) -> tuple[wikidump.PreFilter, ...]:
    filters = []
    explicit = args.prefilter_regex or args.prefilter_path or args.prefilter_query
    if include_default_ns0 and not explicit and not getattr(args, "no_default_prefilter", False):
        filters.append(wikidump.ns0_prefilter())
    if getattr(args, "ns0", False):
        filters.append(wikidump.ns0_prefilter())
    filters.extend(wikidump.PreFilter("regex", e) for e in args.prefilter_regex)
    filters.extend(wikidump.PreFilter("path", e) for e in args.prefilter_path)
    filters.extend(wikidump.PreFilter("struct", e) for e in args.prefilter_query)
    return tuple(filters)


def _collect_postfilters(args) -> tuple:
    filters = []
    if args.postfilter_namespace is not None:
        wanted = args.postfilter_namespace
        filters.append(lambda page: page.namespace == wanted)
    if args.postfilter_min_revisions is not None:
        low = args.postfilter_min_revisions
        filters.append(lambda page: len(page.revisions) >= low)
    if args.postfilter_max_revisions is not None:
        high = args.postfilter_max_revisions
        filters.append(lambda page: len(page.revisions) <= high)
    return tuple(filters)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wikimpact",
        description="Author impact rankings from wiki edit-history dumps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rank = sub.add_parser("rank", help="compute an author ranking from a dump")
    rank.add_argument("dump", help="edit-history dump (.bz2, .gz or plain XML)")
    rank.add_argument("pageviews", nargs="?", default=None,
                      help="traffic dataset: merged file or directory of hourly files")
    rank.add_argument("tag", nargs="?", default=None,
                      help="project tag selecting traffic records, e.g. 'aa' or 'bg.d'")
    rank.add_argument("--measure", default="TextLongevity",
                      choices=measures.MEASURES + ("all",))
    rank.add_argument("--judges", type=int, default=measures.DEFAULT_JUDGES,
                      help="how many following revisions judge an edit")
    _add_parser_options(rank)
    rank.add_argument("--no-default-prefilter", action="store_true",
                      help="do not add the stock main-namespace prefilter")
    rank.add_argument("--postfilter-namespace", type=int, default=None, metavar="NS")
    rank.add_argument("--postfilter-min-revisions", type=int, default=None, metavar="N")
    rank.add_argument("--postfilter-max-revisions", type=int, default=None, metavar="N")
    rank.add_argument("--format", choices=pipeline.OUTPUT_FORMATS, default="console")
    rank.add_argument("--output", default=None,
                      help="write the ranking here instead of stdout; with "
                           "--measure all, one file per measure")
    rank.add_argument("--figure", default=None,
                      help="also render a bar chart of the leading authors to this file")
    rank.add_argument("--drop-zero", action="store_true",
                      help="drop zero-score authors from the ranking")
    rank.add_argument("--drop-anonymous", action="store_true",
                      help="drop the shared anonymous author from the ranking")
    rank.add_argument("--pageview-weighting", action="store_true",
                      help="multiply scores by each page's request count")

    count = sub.add_parser("count", help="parse a dump and count pages and revisions")
    count.add_argument("dump")
    count.add_argument("--ns0", action="store_true",
                       help="apply the stock main-namespace prefilter")
    _add_parser_options(count)
    count.add_argument("--format", choices=("console", "json"), default="console")

    merge = sub.add_parser("merge-pageviews",
                           help="concatenate hourly traffic files into one dataset")
    merge.add_argument("input_dir")
    merge.add_argument("output")
    merge.add_argument("--codec", choices=chunked_io.MERGE_CODECS, default="none")

    check = sub.add_parser("parser-check",
                           help="verify both parser variants agree on a dump")
    check.add_argument("dump")
    check.add_argument("--parallelism", type=int, default=None)

    report = sub.add_parser("bench-report",
                            help="measurement report: recorded reference numbers or live timings")
    report.add_argument("--dump", default=None,
                        help="time decompression, filter paths and parser variants on this dump")
    report.add_argument("--parallelism", type=int, default=None)
    report.add_argument("--csv", default=None, help="also write the report rows as CSV")
    report.add_argument("--figure", default=None, help="also render the rows as a bar chart")

    return parser


def _cmd_rank(args) -> int:
    config = pipeline.RunConfig(
        dump_path=args.dump,
        pageview_path=args.pageviews,
        project_tag=args.tag,
        measure=args.measure,
        judges=args.judges,
        parser_variant=args.parser,
        prefilters=_collect_prefilters(args, include_default_ns0=True),
        postfilters=_collect_postfilters(args),
        parallelism=args.parallelism if args.parallelism else _default_parallelism(),
        output_format=args.format,
        drop_zero=args.drop_zero,
        drop_anonymous=args.drop_anonymous,
        pageview_weighting=args.pageview_weighting,
    )
    result = pipeline.run_ranking(config)

    for name, ranked in result.tables.items():
        rendered = pipeline.render_ranking(ranked, config.output_format)
        if args.output:
            out = Path(args.output)
            if len(result.tables) > 1:
                out = out.with_name(f"{out.stem}.{name}{out.suffix}")
            out.write_text(rendered, encoding="utf-8")
        else:
            if len(result.tables) > 1:
                sys.stdout.write(f"# measure: {name}\n")
            sys.stdout.write(rendered)

    if args.figure:
        from . import figures

        fig_path = Path(args.figure)
        for name, ranked in result.tables.items():
            target = fig_path
            if len(result.tables) > 1:
                target = fig_path.with_name(f"{fig_path.stem}.{name}{fig_path.suffix}")
            # figures follow the report convention: zero scores and the
            # anonymous author are removed before plotting
            plottable = [
                (pos, s) for pos, s in ranked
                if s.score != 0 and s.label != ANONYMOUS_USERNAME
            ]
            figures.ranking_figure(plottable, target, title=name)

    rep = result.report
    print(
        f"pages_parsed={rep.pages_parsed} pages_filtered={rep.pages_filtered} "
        f"revisions_retained={rep.revisions_retained} elapsed={rep.elapsed_s:.2f}s",
        file=sys.stderr,
    )
    for key, value in rep.warnings.items():
        print(f"warning: {key}={value}", file=sys.stderr)
    return 0


def _cmd_count(args) -> int:
    counts = pipeline.run_count(
        args.dump,
        parser_variant=args.parser,
        prefilters=_collect_prefilters(args, include_default_ns0=False),
        parallelism=args.parallelism if args.parallelism else _default_parallelism(),
    )
    if args.format == "json":
        print(json.dumps(counts))
    else:
        print(f"pages: {counts['pages']}")
        print(f"revisions: {counts['revisions']}")
    return 0


def _cmd_merge(args) -> int:
    report = pipeline.run_merge(args.input_dir, args.output, args.codec)
    print(
        f"files_read={report.files_read} lines_written={report.lines_written} "
        f"bytes_in={report.bytes_in} bytes_out={report.bytes_out}"
    )
    return 0


def _cmd_parser_check(args) -> int:
    result = pipeline.run_parser_check(
        args.dump, args.parallelism if args.parallelism else _default_parallelism()
    )
    if result.ok:
        print(f"pass: both variants retain {result.revisions_event} revisions")
        return 0
    print(
        f"fail: event={result.revisions_event} regex={result.revisions_regex} "
        f"first divergent revision id: {result.first_divergent_id}"
    )
    return 1


def _time_call(fn, *fn_args) -> float:
    start = time.perf_counter()
    fn(*fn_args)
    return time.perf_counter() - start


#: Recorded gzip compression measurements of hourly traffic files (sizes in MB).
REFERENCE_GZIP_SAMPLES = (
    ("pagecounts-20160504-05", bench.BenchSample(273.38, 65.0, 1.0)),
    ("pagecounts-20160519-06", bench.BenchSample(386.65, 87.0, 1.0)),
    ("pagecounts-20160531-19", bench.BenchSample(460.69, 110.0, 1.0)),
)

#: Recorded end-to-end timings (seconds): single-node batch baseline vs this
#: style of data-parallel pipeline, per dump.
REFERENCE_SPEEDUPS = (
    ("aawiki-20170501", 23.22, 23.90),
    ("acewiki-20170501", 545.16, 35.57),
    ("bgwiktionary-20170501", 9907.0, 520.59),
)


def _reference_rows() -> list[list[str]]:
    rows = []
    for name, sample in REFERENCE_GZIP_SAMPLES:
        rows.append([
            "compression-factor", name, f"{bench.compression_factor(sample):.2f}", "x",
        ])
    for name, baseline, candidate in REFERENCE_SPEEDUPS:
        rows.append([
            "speedup", name, f"{bench.speedup_percent(baseline, candidate):.2f}", "%",
        ])
    return rows


def _live_rows(dump: str, parallelism: int) -> list[list[str]]:
    rows = []
    drain = lambda it: sum(len(c) for c in it)

    size_mb = Path(dump).stat().st_size / 1e6
    t1 = _time_call(drain, chunked_io.read_decompressed(dump, 1))
    rows.append(["decompress-p1", dump, f"{t1:.3f}", "s"])
    if parallelism > 1:
        tn = _time_call(drain, chunked_io.read_decompressed(dump, parallelism))
        rows.append([f"decompress-p{parallelism}", dump, f"{tn:.3f}", "s"])
        rows.append([
            f"decompress-speedup-p{parallelism}", dump,
            f"{bench.speedup_percent(t1, tn):.1f}", "%",
        ])
    sample = bench.BenchSample(
        decompressed_mb=max(size_mb, 1e-3), compressed_mb=max(size_mb, 1e-3),
        elapsed_ms=t1 * 1000.0,
    )
    rows.append(["read-throughput", dump, f"{bench.throughput(sample):.1f}", "MB/s"])

    filter_variants = (
        ("filter-regex-pre", (wikidump.ns0_prefilter(),), ()),
        ("filter-path-pre", (wikidump.PreFilter("path", ".//ns[.='0']"),), ()),
        ("filter-query-pre",
         (wikidump.PreFilter("struct", "for $p in //page where $p/ns = '0' return $p"),), ()),
        ("filter-post", (), (lambda page: page.namespace == 0,)),
    )
    for name, pre, post in filter_variants:
        def run_filtered():
            cfg = wikidump.ParserConfig(variant="event", prefilters=pre)
            stream = wikidump.apply_postfilters(
                wikidump.iter_parsed_pages(dump, cfg, parallelism), post
            )
            return sum(1 for _ in stream)

        rows.append([name, dump, f"{_time_call(run_filtered):.3f}", "s"])

    for variant in wikidump.PARSER_VARIANTS:
        def run_variant():
            cfg = wikidump.ParserConfig(variant=variant)
            return sum(1 for _ in wikidump.iter_parsed_pages(dump, cfg, parallelism))

        rows.append([f"parse-{variant}", dump, f"{_time_call(run_variant):.3f}", "s"])
    return rows


def _cmd_bench_report(args) -> int:
    headers = ["metric", "subject", "value", "unit"]
    if args.dump:
        parallelism = args.parallelism if args.parallelism else _default_parallelism()
        rows = _live_rows(args.dump, parallelism)
    else:
        rows = _reference_rows()
    print(bench.format_table(headers, rows))
    if args.csv:
        Path(args.csv).write_text(bench.format_csv(headers, rows), encoding="utf-8")
    if args.figure:
        from . import figures

        numeric = [(f"{r[0]} ({r[1]})", float(r[2])) for r in rows]
        figures.bench_figure(numeric, args.figure, title="measurement report", unit="value")
    return 0


_COMMANDS = {
    "rank": _cmd_rank,
    "count": _cmd_count,
    "merge-pageviews": _cmd_merge,
    "parser-check": _cmd_parser_check,
    "bench-report": _cmd_bench_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except WikimpactError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
