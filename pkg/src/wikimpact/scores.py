"""Score algebra over relevance-score collections, ranking assembly, h-index.

All operations are pure and return collections ordered by ascending subject
id, which pins floating-point accumulation order and keeps rankings
reproducible across runs and worker counts.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .errors import DivisionByZero, EmptyCollection
from .model import ANONYMOUS_IDENTIFIER, RelevanceScore

JOIN_OPS = ("add", "sub", "mul", "div")
AGGREGATE_KINDS = ("min", "max", "sum")


def _apply(x: float, y: float, op: str) -> float:
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    raise ValueError(f"unknown operator {op!r}")


def join_op(
    a: Iterable[RelevanceScore], b: Iterable[RelevanceScore], op: str
) -> list[RelevanceScore]:
    """Item-wise combine two collections matched by subject id.

    Subjects present on only one side are omitted (inner join). Labels are
    taken from the left side. Division raises on any zero right-hand score,
    naming the subject.
    """
    if op not in JOIN_OPS:
        raise ValueError(f"unknown operator {op!r}")
    right = {s.subject_id: s for s in b}
    out = []
    for s in sorted(a, key=lambda r: r.subject_id):
        other = right.get(s.subject_id)
        if other is None:
            continue
        if op == "div" and other.score == 0:
            raise DivisionByZero(s.subject_id)
        out.append(RelevanceScore(s.subject_id, s.label, _apply(s.score, other.score, op)))
    return out


def scalar_op(a: Iterable[RelevanceScore], alpha: float, op: str) -> list[RelevanceScore]:
    """Elementwise scalar arithmetic; the subject set is unchanged."""
    if op not in JOIN_OPS:
        raise ValueError(f"unknown operator {op!r}")
    if op == "div" and alpha == 0:
        raise DivisionByZero()
    return [
        RelevanceScore(s.subject_id, s.label, _apply(s.score, alpha, op))
        for s in sorted(a, key=lambda r: r.subject_id)
    ]


def aggregate(a: Iterable[RelevanceScore], kind: str) -> float:
    """min/max/sum over the scores; sum of an empty collection is 0."""
    if kind not in AGGREGATE_KINDS:
        raise ValueError(f"unknown aggregation {kind!r}")
    ordered = sorted(a, key=lambda r: r.subject_id)
    if not ordered:
        if kind == "sum":
            return 0.0
        raise EmptyCollection(f"{kind} of empty collection")
    values = [s.score for s in ordered]
    if kind == "min":
        return min(values)
    if kind == "max":
        return max(values)
    total = 0.0
    for v in values:  # fixed order: ascending subject id
        total += v
    return total


def rank(
    a: Iterable[RelevanceScore],
    drop_zero: bool = False,
    drop_anonymous: bool = False,
) -> list[tuple[int, RelevanceScore]]:
    """Sorted ranking: descending score, ties broken by ascending subject id.

    Optionally removes zero-score entries and the shared anonymous subject
    before ranking. Ranks are dense 1..n over the survivors.
    """
    entries = list(a)
    if drop_zero:
        entries = [s for s in entries if s.score != 0]
    if drop_anonymous:
        entries = [s for s in entries if s.subject_id != ANONYMOUS_IDENTIFIER]
    entries.sort(key=lambda s: (-s.score, s.subject_id))
    return [(pos, s) for pos, s in enumerate(entries, start=1)]


def h_index(citations: Sequence[int]) -> int:
    """Largest i such that the i-th most cited item has at least i citations."""
    ordered = sorted(citations, reverse=True)
    h = 0
    for i, c in enumerate(ordered, start=1):
        if c >= i:
            h = i
        else:
            break
    return h
