"""Turn raw page records into Page/Revision/Contributor objects.

Two interchangeable parser variants exist and must produce identical output:

* ``event``: a streaming XML parser. Character data may arrive split across
  several callbacks, so it is buffered and joined before assignment.
* ``regex``: line-oriented matching with a small pattern table, the way the
  original OCaml tooling read dumps. Tag content is XML-escaped on disk and
  gets unescaped before storage so both variants agree byte-for-byte.

Both variants feed a shared assembly step that applies the page exclusion
rule (redirect marker plus a colon in the title) and collapses consecutive
revisions by the same author, keeping the later revision.
"""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
import xml.sax
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Optional

from . import chunked_io
from .errors import FilterEvaluationError, MalformedPageXml
from .model import Contributor, Page, Revision, identity_matches

log = logging.getLogger(__name__)

PARSER_VARIANTS = ("event", "regex")
PREFILTER_KINDS = ("regex", "path", "struct")

#: Regular expression of the stock main-namespace pre-filter.
NS0_PREFILTER_EXPRESSION = r"(?is).*<ns>0</ns>.*"


@dataclass(frozen=True)
class PreFilter:
    """Predicate over the raw XML of one page, applied before parsing.

    kind "regex" must fully match the record; "path" and "struct" are node
    selections (XPath-style and a query-style ``for $x in PATH where CHILD =
    'VALUE' return $x`` form) that pass when they select at least one node.
    """

    kind: str
    expression: str

    def __post_init__(self):
        if self.kind not in PREFILTER_KINDS:
            raise ValueError(f"unknown prefilter kind {self.kind!r}")
        if self.kind == "regex":
            re.compile(self.expression)
        elif self.kind == "path":
            _probe_path(self.expression)
        else:
            _parse_struct_query(self.expression)


#: Opaque predicate over a parsed Page.
PostFilter = Callable[[Page], bool]


@dataclass(frozen=True)
class ParserConfig:
    variant: str = "event"
    prefilters: tuple[PreFilter, ...] = ()
    collapse_consecutive: bool = True

    def __post_init__(self):
        if self.variant not in PARSER_VARIANTS:
            raise ValueError(f"unknown parser variant {self.variant!r}")


def ns0_prefilter() -> PreFilter:
    return PreFilter("regex", NS0_PREFILTER_EXPRESSION)


@lru_cache(maxsize=256)
def _compiled(expression: str) -> re.Pattern:
    return re.compile(expression)


def _probe_path(expression: str) -> None:
    try:
        _et_select(ET.fromstring("<page/>"), expression)
    except SyntaxError as exc:
        raise ValueError(f"bad path expression {expression!r}: {exc}") from exc


_STRUCT_QUERY = re.compile(
    r"^\s*for\s+\$(?P<var>\w+)\s+in\s+(?P<path>\S+)"
    r"(?:\s+where\s+\$(?P<wvar>\w+)/(?P<child>\S+)\s*=\s*'(?P<value>[^']*)')?"
    r"\s+return\s+\$(?P<rvar>\w+)\s*$"
)


def _parse_struct_query(expression: str):
    """Accept either a bare path or a single-clause for/where/return selection."""
    m = _STRUCT_QUERY.match(expression)
    if m is None:
        _probe_path(expression)
        return None
    if m.group("wvar") not in (None, m.group("var")) or m.group("rvar") != m.group("var"):
        raise ValueError(f"query {expression!r} must bind and return a single variable")
    _probe_path(m.group("path"))
    return m


def _et_select(root: ET.Element, path: str) -> list[ET.Element]:
    p = path.strip()
    if p.startswith("/"):
        # absolute and // paths get anchored via a synthetic wrapper element,
        # so "//page[...]" can select the fragment root itself
        wrapper = ET.Element("wrapper")
        wrapper.append(root)
        return wrapper.findall("." + p)
    return root.findall(p)


def _prefilter_accepts(pf: PreFilter, record: str) -> bool:
    if pf.kind == "regex":
        return _compiled(pf.expression).fullmatch(record) is not None
    try:
        root = ET.fromstring(record)
    except ET.ParseError as exc:
        raise FilterEvaluationError(str(exc)) from exc
    if pf.kind == "path":
        return bool(_et_select(root, pf.expression))
    m = _parse_struct_query(pf.expression)
    if m is None:
        return bool(_et_select(root, pf.expression))
    selected = _et_select(root, m.group("path"))
    if m.group("child") is None:
        return bool(selected)
    for node in selected:
        for child in node.findall(m.group("child")):
            if (child.text or "") == m.group("value"):
                return True
    return False


def apply_prefilters(
    record: str, filters: Iterable[PreFilter], counters: Optional[Counter] = None
) -> bool:
    """True iff every filter accepts; stops at the first rejection.

    Evaluation errors (unparsable XML under a node-selection filter) reject
    the record with a logged warning rather than aborting the run.
    """
    for pf in filters:
        try:
            if not _prefilter_accepts(pf, record):
                return False
        except FilterEvaluationError as exc:
            log.warning("prefilter %r failed to evaluate: %s", pf.expression, exc)
            if counters is not None:
                counters["prefilter_errors"] += 1
            return False
    return True


# --- raw parse results shared by both variants -----------------------------

@dataclass
class _RawRevision:
    id: Optional[int] = None
    parent_id: Optional[int] = None
    timestamp: Optional[str] = None
    text: str = ""
    contributor: Optional[Contributor] = None


@dataclass
class _RawPage:
    id: Optional[int] = None
    title: str = ""
    namespace: int = 0
    redirect: bool = False
    revisions: list[_RawRevision] = field(default_factory=list)


class _ContributorBuilder:
    __slots__ = ("user_id", "username", "ip", "deleted")

    def __init__(self):
        self.user_id = None
        self.username = None
        self.ip = None
        self.deleted = False

    def build(self) -> Contributor:
        if self.deleted:
            return Contributor.deleted()
        if self.ip is not None:
            return Contributor.anonymous(self.ip)
        if self.username is not None:
            return Contributor.registered(self.username, self.user_id)
        # nothing identifying survived in the history: treat like a removed account
        return Contributor.deleted()


def collapse_consecutive(revisions: list[_RawRevision]) -> list[_RawRevision]:
    """Drop the earlier of any adjacent pair by the same author.

    Works like the streaming parser: each incoming revision evicts matching
    predecessors, so runs of same-author edits keep only the final state and
    no adjacent pair in the result matches.
    """
    kept: list[_RawRevision] = []
    for rev in revisions:
        while kept and identity_matches(kept[-1].contributor, rev.contributor):
            kept.pop()
        kept.append(rev)
    return kept


def _assemble_page(raw: _RawPage, collapse: bool) -> Optional[Page]:
    if raw.redirect and ":" in raw.title:
        return None
    revisions = raw.revisions
    if any(r.id is None for r in revisions):
        raise MalformedPageXml(f"page {raw.id}: revision without an id")
    if collapse:
        revisions = collapse_consecutive(revisions)
    try:
        built = tuple(
            Revision(
                id=r.id,
                text=r.text,
                contributor=r.contributor,
                within_page_id=pos,
                parent_id=r.parent_id,
                timestamp=r.timestamp,
            )
            for pos, r in enumerate(revisions, start=1)
        )
        return Page(id=raw.id, title=raw.title, namespace=raw.namespace, revisions=built)
    except (TypeError, ValueError) as exc:
        raise MalformedPageXml(str(exc)) from exc


# --- event-based variant ----------------------------------------------------

class _PageHandler(xml.sax.ContentHandler):
    """Tracks the element stack and collects page/revision/contributor fields.

    Character callbacks may deliver content in arbitrary chunks; pieces are
    buffered and joined when the element closes.
    """

    def __init__(self):
        super().__init__()
        self.stack: list[str] = []
        self.page = _RawPage()
        self.revision: Optional[_RawRevision] = None
        self.contributor: Optional[_ContributorBuilder] = None
        self.pieces: list[str] = []

    def startElement(self, name, attrs):
        self.stack.append(name)
        self.pieces = []
        if name == "revision":
            self.revision = _RawRevision()
        elif name == "contributor":
            self.contributor = _ContributorBuilder()
            if attrs.get("deleted") == "deleted":
                self.contributor.deleted = True
        elif name == "redirect" and self.revision is None:
            self.page.redirect = True

    def characters(self, content):
        self.pieces.append(content)

    def endElement(self, name):
        self.stack.pop()
        parent = self.stack[-1] if self.stack else ""
        value = "".join(self.pieces)
        self.pieces = []
        if name == "title" and parent == "page":
            self.page.title = value
        elif name == "ns" and parent == "page":
            self.page.namespace = int(value)
        elif name == "id":
            if parent == "page":
                self.page.id = int(value)
            elif parent == "revision":
                self.revision.id = int(value)
            elif parent == "contributor":
                self.contributor.user_id = int(value)
        elif name == "parentid" and parent == "revision":
            self.revision.parent_id = int(value)
        elif name == "timestamp" and parent == "revision":
            self.revision.timestamp = value
        elif name == "text" and parent == "revision":
            self.revision.text = value
        elif name == "username" and parent == "contributor":
            self.contributor.username = value
        elif name == "ip" and parent == "contributor":
            self.contributor.ip = value
        elif name == "contributor":
            self.revision.contributor = self.contributor.build()
            self.contributor = None
        elif name == "revision":
            if self.revision.contributor is None:
                self.revision.contributor = Contributor.deleted()
            self.page.revisions.append(self.revision)
            self.revision = None


def _parse_event(record: str) -> _RawPage:
    handler = _PageHandler()
    try:
        xml.sax.parseString(record.encode("utf-8"), handler)
    except (xml.sax.SAXException, ValueError, TypeError, AttributeError) as exc:
        raise MalformedPageXml(str(exc)) from exc
    if handler.page.id is None:
        raise MalformedPageXml("page without an id")
    return handler.page


# --- regex line variant -----------------------------------------------------

#: Line-pattern table of the regex variant. Module-level so tests can swap
#: entries to simulate a broken table.
REGEX_PATTERNS = {
    "title": re.compile(r"<title>(.*?)</title>"),
    "ns": re.compile(r"<ns>(-?\d+)</ns>"),
    "id": re.compile(r"<id>(\d+)</id>"),
    "redirect": re.compile(r"<redirect\b"),
    "revision_open": re.compile(r"<revision>"),
    "revision_close": re.compile(r"</revision>"),
    "parentid": re.compile(r"<parentid>(\d+)</parentid>"),
    "timestamp": re.compile(r"<timestamp>(.*?)</timestamp>"),
    "contributor_deleted": re.compile(r'<contributor deleted="deleted"\s*/>'),
    "contributor_open": re.compile(r"<contributor>"),
    "contributor_close": re.compile(r"</contributor>"),
    "username": re.compile(r"<username>(.*?)</username>"),
    "ip": re.compile(r"<ip>(.*?)</ip>"),
    # extra attributes after xml:space are allowed; single-page exports add e.g. bytes="..."
    "text_open": re.compile(r'<text xml:space="preserve[^>]*>'),
    "text_close": re.compile(r"</text>"),
}

_CHARREF = re.compile(r"&(lt|gt|amp|quot|apos|#\d+|#x[0-9a-fA-F]+);")
_CHARREF_NAMED = {"lt": "<", "gt": ">", "amp": "&", "quot": '"', "apos": "'"}


def unescape_xml(value: str) -> str:
    """Resolve the five predefined XML entities and numeric character references."""
    def repl(m: re.Match) -> str:
        ref = m.group(1)
        if ref in _CHARREF_NAMED:
            return _CHARREF_NAMED[ref]
        if ref.startswith("#x"):
            return chr(int(ref[2:], 16))
        return chr(int(ref[1:]))

    return _CHARREF.sub(repl, value)


def _parse_regex(record: str) -> _RawPage:
    pat = REGEX_PATTERNS
    page = _RawPage()
    revision: Optional[_RawRevision] = None
    contributor: Optional[_ContributorBuilder] = None
    text_pieces: Optional[list[str]] = None
    saw_page_id = False

    for line in record.split("\n"):
        if text_pieces is not None:
            m = pat["text_close"].search(line)
            if m is None:
                text_pieces.append(line)
            else:
                text_pieces.append(line[: m.start()])
                revision.text = unescape_xml("\n".join(text_pieces))
                text_pieces = None
            continue

        if contributor is not None:
            if pat["contributor_close"].search(line):
                revision.contributor = contributor.build()
                contributor = None
            elif m := pat["username"].search(line):
                contributor.username = unescape_xml(m.group(1))
            elif m := pat["ip"].search(line):
                contributor.ip = unescape_xml(m.group(1))
            elif m := pat["id"].search(line):
                contributor.user_id = int(m.group(1))
            continue

        if revision is not None:
            if m := pat["text_open"].search(line):
                if m.group(0).rstrip().endswith("/>"):
                    revision.text = ""
                    continue
                rest = line[m.end():]
                closing = pat["text_close"].search(rest)
                if closing is not None:
                    revision.text = unescape_xml(rest[: closing.start()])
                else:
                    text_pieces = [rest]
                continue
            if pat["contributor_deleted"].search(line):
                builder = _ContributorBuilder()
                builder.deleted = True
                revision.contributor = builder.build()
                continue
            if pat["contributor_open"].search(line):
                contributor = _ContributorBuilder()
                continue
            if pat["revision_close"].search(line):
                if revision.contributor is None:
                    revision.contributor = Contributor.deleted()
                page.revisions.append(revision)
                revision = None
                continue
            if m := pat["parentid"].search(line):
                revision.parent_id = int(m.group(1))
            elif m := pat["timestamp"].search(line):
                revision.timestamp = m.group(1)
            elif m := pat["id"].search(line):
                revision.id = int(m.group(1))
            continue

        if pat["revision_open"].search(line):
            revision = _RawRevision()
        elif m := pat["title"].search(line):
            page.title = unescape_xml(m.group(1))
        elif m := pat["ns"].search(line):
            page.namespace = int(m.group(1))
        elif not saw_page_id and (m := pat["id"].search(line)):
            page.id = int(m.group(1))
            saw_page_id = True
        elif pat["redirect"].search(line):
            page.redirect = True

    if page.id is None:
        raise MalformedPageXml("page without an id")
    return page


def parse_page(
    record: str, config: ParserConfig, counters: Optional[Counter] = None
) -> Optional[Page]:
    """Parse one raw page record; None for excluded or unparsable pages.

    Returns None either when the page matches the exclusion rule (redirect
    marker and a colon in the title) or when the record cannot be parsed; the
    latter is counted and logged, mirroring a skip rather than a failure.
    """
    try:
        raw = _parse_event(record) if config.variant == "event" else _parse_regex(record)
        page = _assemble_page(raw, config.collapse_consecutive)
    except MalformedPageXml as exc:
        log.warning("skipping malformed page record: %s", exc)
        if counters is not None:
            counters["malformed_pages"] += 1
        return None
    if page is None and counters is not None:
        counters["excluded_redirect_colon"] += 1
    return page


def apply_postfilters(pages: Iterable[Page], filters: Iterable[PostFilter]) -> Iterator[Page]:
    """Keep pages accepted by every predicate; evaluation short-circuits."""
    filters = list(filters)
    for page in pages:
        if all(f(page) for f in filters):
            yield page


def _parse_record_batch(args: tuple[list[str], ParserConfig]) -> tuple[list[Page], Counter]:
    records, config = args
    local: Counter = Counter()
    pages = []
    for record in records:
        local["pages_seen"] += 1
        if not apply_prefilters(record, config.prefilters, local):
            local["prefilter_rejected"] += 1
            continue
        page = parse_page(record, config, local)
        if page is not None:
            pages.append(page)
    return pages, local


def _batched(items: Iterable, size: int) -> Iterator[list]:
    batch: list = []
    for item in items:
        batch.append(item)
        if len(batch) >= size:
            yield batch
            batch = []
    if batch:
        yield batch


_PARSE_BATCH_SIZE = 16


def iter_parsed_pages(
    dump_path, config: ParserConfig, parallelism: int = 1,
    counters: Optional[Counter] = None,
) -> Iterator[Page]:
    """Full read path: decompress, split, dedup, prefilter, parse.

    Records are parsed concurrently when parallelism > 1, in bounded batches
    so a large dump never sits in memory whole; output keeps document order
    either way, so downstream results never depend on the worker count.
    """
    counters = counters if counters is not None else Counter()
    records = chunked_io.dedup_records(
        chunked_io.split_pages(chunked_io.read_decompressed(dump_path, parallelism))
    )
    batches = _batched(records, _PARSE_BATCH_SIZE)
    if parallelism == 1:
        results = map(_parse_record_batch, ((b, config) for b in batches))
        for pages, local in results:
            counters.update(local)
            yield from pages
        return
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        # keep a bounded window of batches in flight: Executor.map would pull
        # the entire record stream into memory up front
        window: deque = deque()
        for batch in batches:
            window.append(pool.submit(_parse_record_batch, (batch, config)))
            if len(window) >= parallelism * 4:
                pages, local = window.popleft().result()
                counters.update(local)
                yield from pages
        while window:
            pages, local = window.popleft().result()
            counters.update(local)
            yield from pages


def parse_equivalence_ids(dump_path, parallelism: int = 1) -> tuple[list[int], list[int]]:
    """Retained revision ids under both parser variants, each sorted."""
    ids = {}
    for variant in PARSER_VARIANTS:
        config = ParserConfig(variant=variant)
        ids[variant] = sorted(
            rev.id
            for page in iter_parsed_pages(dump_path, config, parallelism)
            for rev in page.revisions
        )
    return ids["event"], ids["regex"]
