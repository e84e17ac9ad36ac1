"""Word-level text tracking and the seven per-author contribution measures.

Text is compared at word granularity. The difference between two revisions is
derived from a longest common subsequence of their token sequences; insertions
that survive into later revisions reward the author, while edits are judged by
how much closer they move the text to what later revisions kept.

Word tracking deliberately looks at three consecutive revisions only (what did
r_i add relative to r_{i-1}, and how much of that is still present later).
That keeps every page independently computable, at the cost of crediting
restored text to the restorer.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .model import Page, RelevanceScore, identifier

#: Whitespace-free word tokens, the unit all diffs work on.
TokenSeq = list[str]

#: Canonical names of all supported measures.
MEASURES = (
    "NumEdits",
    "TextOnly",
    "EditOnly",
    "TextLongevity",
    "EditLongevity",
    "TenRevisions",
    "TextLongevityWithPenalty",
)

#: Fixed survival horizon of the TenRevisions measure.
TEN_REVISIONS_HORIZON = 10

DEFAULT_JUDGES = 10


@dataclass(frozen=True)
class WordDiff:
    """Word-level difference between an older and a newer token sequence."""

    inserted: int
    deleted: int
    added_tokens: tuple[str, ...]

    def __post_init__(self):
        if self.inserted != len(self.added_tokens):
            raise ValueError("inserted count must equal the number of added tokens")


@dataclass(frozen=True)
class MeasureConfig:
    measure: str = "TextLongevity"
    judges: int = DEFAULT_JUDGES

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.judges <= 0:
            raise ValueError("judges must be positive")


@dataclass(frozen=True)
class RevisionScore:
    """Per-revision score, keyed by the contributor's identity hash."""

    revision_id: int
    contributor_id: int
    score: float
    label: str = ""

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score for revision {self.revision_id} is not finite")


def tokenize(text: str) -> TokenSeq:
    """Split on runs of Unicode whitespace; punctuation stays attached to words."""
    return text.split()


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    # Allison-Dix bit-string LCS; one bignum per row keeps this O(len(a)/wordsize)
    # per token of b.
    if not a or not b:
        return 0
    masks: dict[str, int] = {}
    for i, tok in enumerate(a):
        masks[tok] = masks.get(tok, 0) | (1 << i)
    full = (1 << len(a)) - 1
    row = 0
    for tok in b:
        x = row | masks.get(tok, 0)
        row = x & ~(x - ((row << 1) | 1)) & full
    return row.bit_count()


def _lcs_alignment(older: Sequence[str], newer: Sequence[str]) -> list[tuple[int, int]]:
    """One canonical LCS alignment as (older_idx, newer_idx) pairs.

    Deterministic tie-break: of all maximum-length alignments, the one whose
    pair sequence is lexicographically smallest (match the earliest older
    token first, and for it the earliest possible newer token).
    """
    m, n = len(older), len(newer)
    # dp[i][j] = LCS length of older[i:] vs newer[j:]
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m - 1, -1, -1):
        row, below = dp[i], dp[i + 1]
        for j in range(n - 1, -1, -1):
            if older[i] == newer[j]:
                row[j] = below[j + 1] + 1
            else:
                bj = below[j]
                rj = row[j + 1]
                row[j] = bj if bj >= rj else rj
    pairs = []
    i, j = 0, 0
    while i < m and j < n and dp[i][j] > 0:
        target = dp[i][j]
        # earliest consistent match of older[i]; if none exists, older[i] can
        # be skipped without losing length
        found = -1
        jj = j
        while jj < n:
            if older[i] == newer[jj] and dp[i + 1][jj + 1] + 1 == target:
                found = jj
                break
            if dp[i][jj + 1] < target:
                break
            jj += 1
        if found >= 0:
            pairs.append((i, found))
            j = found + 1
        i += 1
    return pairs


def word_diff(older: Sequence[str], newer: Sequence[str]) -> WordDiff:
    """Insertions, deletions and the inserted tokens between two token sequences."""
    pairs = _lcs_alignment(older, newer)
    lcs = len(pairs)
    matched_newer = {j for _, j in pairs}
    added = tuple(tok for j, tok in enumerate(newer) if j not in matched_newer)
    return WordDiff(inserted=len(newer) - lcs, deleted=len(older) - lcs, added_tokens=added)


def edit_distance(older: Sequence[str], newer: Sequence[str]) -> int:
    """max(insertions, deletions) relative to a longest common subsequence."""
    lcs = _lcs_len(older, newer)
    return max(len(newer) - lcs, len(older) - lcs)


def edit_quality(
    prev: Sequence[str], cur: Sequence[str], judge: Sequence[str]
) -> Optional[float]:
    """Normalized improvement of cur over prev as seen from a later judge revision.

    (d(prev, judge) - d(cur, judge)) / d(prev, cur), clamped to [-1, 1].
    Undefined (None) when prev and cur are word-identical.
    """
    denom = edit_distance(prev, cur)
    if denom == 0:
        return None
    q = (edit_distance(prev, judge) - edit_distance(cur, judge)) / denom
    return max(-1.0, min(1.0, q))


def live_tokens(added: Iterable[str], future: Sequence[str]) -> int:
    """How many of the added tokens (with multiplicity) appear in a later revision."""
    added_counts = Counter(added)
    if not added_counts:
        return 0
    future_counts = Counter(future)
    return sum(min(c, future_counts[tok]) for tok, c in added_counts.items())


def score_table(page: Page, judges: int, measures: Sequence[str]) -> dict[str, list[RevisionScore]]:
    """Score every retained revision of one page under the requested measures.

    Shared artifacts (token sequences, per-revision diffs) are computed once,
    so asking for several measures costs a single pass over the page.
    """
    revisions = page.revisions
    tokens = [tokenize(r.text) for r in revisions]
    parents = [tokens[k - 1] if k > 0 else [] for k in range(len(revisions))]

    need_diff = any(m != "NumEdits" for m in measures)
    diffs = [word_diff(parents[k], tokens[k]) for k in range(len(revisions))] if need_diff else []
    dists = [max(d.inserted, d.deleted) for d in diffs]

    table: dict[str, list[RevisionScore]] = {m: [] for m in measures}
    for k, rev in enumerate(revisions):
        followers = len(revisions) - 1 - k
        horizon = min(judges, followers)

        txt = diffs[k].inserted if need_diff else 0
        text_longevity = None
        if "TextLongevity" in table or "TextLongevityWithPenalty" in table:
            if txt == 0:
                text_longevity = 0.0
            elif horizon == 0:
                text_longevity = float(txt)  # no later evidence: assume full survival
            else:
                survival = 0.0
                for step in range(1, horizon + 1):
                    survival += live_tokens(diffs[k].added_tokens, tokens[k + step]) / txt
                text_longevity = txt * (survival / horizon)

        edit_longevity = None
        if "EditLongevity" in table or "TextLongevityWithPenalty" in table:
            qualities = []
            for step in range(1, horizon + 1):
                q = edit_quality(parents[k], tokens[k], tokens[k + step])
                if q is not None:
                    qualities.append(q)
            if qualities:
                edit_longevity = dists[k] * (sum(qualities) / len(qualities))
            else:
                edit_longevity = 0.0  # no defined judge: neutral edit

        for name in measures:
            if name == "NumEdits":
                value = 1.0
            elif name == "TextOnly":
                value = float(txt)
            elif name == "EditOnly":
                value = float(dists[k])
            elif name == "TextLongevity":
                value = text_longevity
            elif name == "EditLongevity":
                value = edit_longevity
            elif name == "TenRevisions":
                if followers == 0 or txt == 0:
                    value = 0.0
                else:
                    target = k + min(TEN_REVISIONS_HORIZON, followers)
                    value = float(live_tokens(diffs[k].added_tokens, tokens[target]))
            elif name == "TextLongevityWithPenalty":
                value = text_longevity + min(0.0, edit_longevity)
            else:
                raise ValueError(f"unknown measure {name!r}")
            table[name].append(
                RevisionScore(
                    revision_id=rev.id,
                    contributor_id=identifier(rev.contributor),
                    score=value,
                    label=rev.contributor.identity_string(),
                )
            )
    return table


def score_page(page: Page, config: MeasureConfig) -> list[RevisionScore]:
    """Per-revision scores for one page under a single measure."""
    return score_table(page, config.judges, (config.measure,))[config.measure]


def score_page_all(page: Page, judges: int = DEFAULT_JUDGES) -> dict[str, list[RevisionScore]]:
    """All seven measures for one page in a single pass."""
    return score_table(page, judges, MEASURES)


def pageview_weighted(scores: Iterable[RevisionScore], page: Page) -> list[RevisionScore]:
    """Scale each score by the page's request count; no recorded traffic means 0."""
    weight = page.pageview.request_count if page.pageview is not None else 0
    return [
        RevisionScore(s.revision_id, s.contributor_id, s.score * weight, s.label)
        for s in scores
    ]


def reduce_by_contributor(scores: Iterable[RevisionScore]) -> list[RelevanceScore]:
    """Sum per-revision scores by contributor identity.

    Accumulation follows the input stream order; the label is the
    lexicographically smallest one observed for the identity, so any sharding
    of the input that preserves per-shard order merges to the same table.
    """
    totals: dict[int, float] = {}
    labels: dict[int, str] = {}
    for s in scores:
        totals[s.contributor_id] = totals.get(s.contributor_id, 0.0) + s.score
        prev = labels.get(s.contributor_id)
        if prev is None or s.label < prev:
            labels[s.contributor_id] = s.label
    return [
        RelevanceScore(subject_id=cid, label=labels[cid], score=totals[cid])
        for cid in sorted(totals)
    ]
