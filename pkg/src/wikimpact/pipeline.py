"""End-to-end runs: parse, join traffic, score, rank, and render results.

The flow is parse -> store -> process -> output: records stream out of the
compressed dump, become Page objects, optionally pick up traffic totals,
every page is scored independently, and per-author sums are ranked. Results
are deterministic for a fixed configuration regardless of the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import chunked_io, measures, pageviews, scores, wikidump
from .model import Page, RelevanceScore

OUTPUT_FORMATS = ("console", "csv", "json")

#: Compressed dumps above this size default to the regex parser variant,
#: which wins on large inputs; smaller dumps use the event parser.
REGEX_VARIANT_THRESHOLD_BYTES = 500 * 1024 * 1024


@dataclass(frozen=True)
class RunConfig:
    dump_path: str
    pageview_path: Optional[str] = None
    project_tag: Optional[str] = None
    measure: str = "TextLongevity"
    judges: int = measures.DEFAULT_JUDGES
    parser_variant: str = "auto"
    prefilters: tuple[wikidump.PreFilter, ...] = (wikidump.ns0_prefilter(),)
    postfilters: tuple[wikidump.PostFilter, ...] = ()
    parallelism: int = 1
    output_format: str = "console"
    drop_zero: bool = False
    drop_anonymous: bool = False
    pageview_weighting: bool = False

    def __post_init__(self):
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"unknown output format {self.output_format!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be positive")
        if self.measure != "all" and self.measure not in measures.MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.pageview_weighting and (self.pageview_path is None or self.project_tag is None):
            raise ValueError("pageview weighting needs a pageview path and a project tag")


@dataclass
class RunReport:
    pages_parsed: int = 0
    pages_filtered: int = 0
    revisions_retained: int = 0
    warnings: dict = field(default_factory=dict)
    elapsed_s: float = 0.0


@dataclass
class RankingResult:
    """Per-measure rankings plus the run report."""

    tables: dict[str, list[tuple[int, RelevanceScore]]]
    report: RunReport


def resolve_parser_variant(variant: str, dump_path) -> str:
    if variant != "auto":
        return variant
    size = Path(dump_path).stat().st_size
    return "regex" if size > REGEX_VARIANT_THRESHOLD_BYTES else "event"


def _load_pages(config: RunConfig, counters: Counter) -> list[Page]:
    parser_config = wikidump.ParserConfig(
        variant=resolve_parser_variant(config.parser_variant, config.dump_path),
        prefilters=config.prefilters,
    )
    pages = list(
        wikidump.apply_postfilters(
            wikidump.iter_parsed_pages(
                config.dump_path, parser_config, config.parallelism, counters
            ),
            config.postfilters,
        )
    )
    if config.pageview_path is not None:
        tag = pageviews.ProjectTag(config.project_tag) if config.project_tag else None
        views = pageviews.load_aggregated_views(config.pageview_path, tag, counters)
        pages = pageviews.join_pages_with_views(pages, views)
    return pages


def run_ranking(config: RunConfig) -> RankingResult:
    """Execute the whole pipeline and rank authors under the configured measure(s)."""
    started = time.perf_counter()
    counters: Counter = Counter()
    pages = _load_pages(config, counters)

    wanted = measures.MEASURES if config.measure == "all" else (config.measure,)
    per_measure: dict[str, list[measures.RevisionScore]] = {m: [] for m in wanted}
    revisions_retained = 0
    for page in pages:
        revisions_retained += len(page.revisions)
        table = measures.score_table(page, config.judges, wanted)
        for name in wanted:
            page_scores = table[name]
            if config.pageview_weighting:
                page_scores = measures.pageview_weighted(page_scores, page)
            per_measure[name].extend(page_scores)

    tables = {
        name: scores.rank(
            measures.reduce_by_contributor(per_measure[name]),
            drop_zero=config.drop_zero,
            drop_anonymous=config.drop_anonymous,
        )
        for name in wanted
    }
    report = RunReport(
        pages_parsed=counters["pages_seen"],
        pages_filtered=counters["pages_seen"] - len(pages),
        revisions_retained=revisions_retained,
        warnings={k: v for k, v in sorted(counters.items()) if k != "pages_seen"},
        elapsed_s=time.perf_counter() - started,
    )
    return RankingResult(tables=tables, report=report)


def run_count(
    dump_path,
    parser_variant: str = "auto",
    prefilters: tuple[wikidump.PreFilter, ...] = (),
    parallelism: int = 1,
) -> dict[str, int]:
    """Parse-only validation path: how many pages and retained revisions survive."""
    parser_config = wikidump.ParserConfig(
        variant=resolve_parser_variant(parser_variant, dump_path),
        prefilters=prefilters,
    )
    pages = 0
    revisions = 0
    for page in wikidump.iter_parsed_pages(dump_path, parser_config, parallelism):
        pages += 1
        revisions += len(page.revisions)
    return {"pages": pages, "revisions": revisions}


def run_merge(input_dir, output, codec: str = "none") -> chunked_io.MergeReport:
    return chunked_io.merge_files(input_dir, output, codec)


@dataclass(frozen=True)
class ParserCheckResult:
    ok: bool
    revisions_event: int
    revisions_regex: int
    first_divergent_id: Optional[int] = None


def run_parser_check(dump_path, parallelism: int = 1) -> ParserCheckResult:
    """Compare retained revision ids between the two parser variants."""
    event_ids, regex_ids = wikidump.parse_equivalence_ids(dump_path, parallelism)
    event_set, regex_set = set(event_ids), set(regex_ids)
    if event_set == regex_set:
        return ParserCheckResult(True, len(event_ids), len(regex_ids))
    divergent = min(event_set.symmetric_difference(regex_set))
    return ParserCheckResult(False, len(event_ids), len(regex_ids), divergent)


# --- result rendering -------------------------------------------------------

def render_ranking_csv(ranked: list[tuple[int, RelevanceScore]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "subject_id", "label", "score"])
    for pos, s in ranked:
        writer.writerow([pos, s.subject_id, s.label, f"{s.score:.6f}"])
    return buf.getvalue()


def render_ranking_json(ranked: list[tuple[int, RelevanceScore]]) -> str:
    rows = [
        {"rank": pos, "subject_id": s.subject_id, "label": s.label, "score": s.score}
        for pos, s in ranked
    ]
    return json.dumps(rows, ensure_ascii=False, indent=2) + "\n"


def render_ranking_console(ranked: list[tuple[int, RelevanceScore]]) -> str:
    lines = [f"{'rank':>4}  {'score':>16}  {'subject_id':>20}  label"]
    for pos, s in ranked:
        lines.append(f"{pos:>4}  {s.score:>16.6f}  {s.subject_id:>20}  {s.label}")
    return "\n".join(lines) + "\n"


def render_ranking(ranked: list[tuple[int, RelevanceScore]], output_format: str) -> str:
    if output_format == "csv":
        return render_ranking_csv(ranked)
    if output_format == "json":
        return render_ranking_json(ranked)
    return render_ranking_console(ranked)
