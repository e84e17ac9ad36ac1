"""Hourly traffic records: line parsing, per-title aggregation, page join.

A traffic line is "<project> <title> <count> <size>", with the title
percent-encoded and underscores standing in for spaces. Matching against
parsed pages therefore decodes the title first. Project tags distinguish
sibling projects of one wiki ("bg" is the encyclopedia, "bg.d" the
dictionary); matching is exact, never by prefix.
"""

from __future__ import annotations

import gzip
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional
from urllib.parse import unquote

from .model import Page, Pageview

#: Project suffixes that may follow the wiki tag.
PROJECT_SUFFIXES = (".b", ".d", ".m", ".mw", ".n", ".q", ".s", ".v", ".w")


@dataclass(frozen=True)
class ProjectTag:
    """Wiki tag plus optional project suffix; a bare tag is the encyclopedia."""

    value: str

    def __post_init__(self):
        if not self.value:
            raise ValueError("project tag must be non-empty")
        if "." in self.value:
            suffix = self.value[self.value.index("."):]
            if suffix not in PROJECT_SUFFIXES:
                raise ValueError(f"unknown project suffix {suffix!r}")


def decode_title(raw: str, counters: Optional[Counter] = None) -> str:
    """Underscores to spaces, then percent-decode as UTF-8.

    Titles whose percent escapes do not form valid UTF-8 are kept literally
    (and counted) instead of being dropped, so their traffic still matches if
    a page carries the same literal title.
    """
    spaced = raw.replace("_", " ")
    try:
        return unquote(spaced, errors="strict")
    except UnicodeDecodeError:
        if counters is not None:
            counters["undecodable_titles"] += 1
        return spaced


def parse_pageview_line(line: str, counters: Optional[Counter] = None) -> Optional[Pageview]:
    """One traffic line to a Pageview, or None (counted) when malformed."""
    parts = line.rstrip("\n").split(" ")
    if len(parts) != 4:
        if counters is not None:
            counters["pageview_bad_lines"] += 1
        return None
    project, raw_title, count_s, size_s = parts
    try:
        count = int(count_s)
        size = int(size_s)
        if count < 0 or size < 0:
            raise ValueError
    except ValueError:
        if counters is not None:
            counters["pageview_bad_lines"] += 1
        return None
    return Pageview(
        project_name=project,
        page_title=decode_title(raw_title, counters),
        request_count=count,
        request_size=size,
    )


def aggregate_pageviews(
    views: Iterable[Pageview], project: Optional[ProjectTag] = None
) -> list[Pageview]:
    """Group traffic by (project, title) and sum counts and sizes.

    With a project tag, records of other projects are dropped before
    grouping; without one the string comparison is skipped entirely and all
    projects aggregate side by side.
    """
    totals: dict[tuple[str, str], list[int]] = {}
    if project is not None:
        wanted = project.value
        for v in views:
            if v.project_name != wanted:
                continue
            t = totals.setdefault((v.project_name, v.page_title), [0, 0])
            t[0] += v.request_count
            t[1] += v.request_size
    else:
        for v in views:
            t = totals.setdefault((v.project_name, v.page_title), [0, 0])
            t[0] += v.request_count
            t[1] += v.request_size
    return [
        Pageview(project_name=proj, page_title=title, request_count=c, request_size=s)
        for (proj, title), (c, s) in sorted(totals.items())
    ]


def join_pages_with_views(
    pages: Iterable[Page], views: Iterable[Pageview]
) -> list[Page]:
    """Attach traffic to pages by decoded title; pages without traffic keep None.

    Left-outer semantics: every input page appears exactly once in the
    output. Expects views already aggregated to one record per title.
    """
    by_title: dict[str, Pageview] = {}
    for v in views:
        by_title.setdefault(v.page_title, v)
    return [replace(page, pageview=by_title.get(page.title)) for page in pages]


def iter_pageview_lines(path, counters: Optional[Counter] = None) -> Iterator[str]:
    """Lines of a traffic dataset: a single file or a directory of hourly files.

    Directories are read in sorted filename order, taking files named after
    the hourly conventions ("pagecounts-*", "pageviews-*") or any plain file
    when none match (a premerged dataset dropped into its own directory).
    ".gz" files are decompressed on the fly.
    """
    p = Path(path)
    if p.is_dir():
        files = sorted(
            f for f in p.iterdir()
            if f.is_file() and (f.name.startswith("pagecounts-") or f.name.startswith("pageviews-"))
        )
        if not files:
            files = sorted(f for f in p.iterdir() if f.is_file())
    else:
        files = [p]
    for f in files:
        opener = gzip.open if f.suffix == ".gz" else open
        with opener(f, "rt", encoding="utf-8", errors="replace") as fh:
            for line in fh:
                yield line


def load_aggregated_views(
    path, project: Optional[ProjectTag] = None, counters: Optional[Counter] = None
) -> list[Pageview]:
    """Parse and aggregate a whole traffic dataset in one call."""
    parsed = (
        parse_pageview_line(line, counters) for line in iter_pageview_lines(path, counters)
    )
    return aggregate_pageviews((v for v in parsed if v is not None), project)
