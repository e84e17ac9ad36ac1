"""Core value objects shared by the whole pipeline.

Everything here is an immutable dataclass, safe to share between workers.
Contributor identity is the load-bearing part: all skip rules and the final
per-author aggregation key off :func:`identifier` and :func:`identity_matches`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

#: Impossible username assigned to every anonymous contributor. The characters
#: '#', '<' and '>' cannot appear in real usernames, so no registered account
#: can collide with it.
ANONYMOUS_USERNAME = "##<<__-=ANONYMOUS=-__>>##"

#: Fixed identity string for contributors whose account was deleted from the
#: history. Two deleted contributors always compare equal.
DELETED_IDENTITY = "##DELETED##"

_I64_MAX = 2**63 - 1
_I64_MIN = -(2**63)


class ContributorKind(Enum):
    REGISTERED = "registered"
    ANONYMOUS = "anonymous"
    DELETED = "deleted"


@dataclass(frozen=True)
class Contributor:
    """Author identity: registered account, anonymous IP, or deleted."""

    kind: ContributorKind
    user_id: Optional[int] = None
    username: Optional[str] = None
    ip: Optional[str] = None

    def __post_init__(self):
        if self.user_id is not None and self.user_id < 0:
            raise ValueError("user_id must be non-negative")
        if self.kind is ContributorKind.REGISTERED:
            if self.username is None:
                raise ValueError("registered contributor needs a username")
        elif self.kind is ContributorKind.ANONYMOUS:
            if self.ip is None:
                raise ValueError("anonymous contributor needs an ip")
            if self.username != ANONYMOUS_USERNAME:
                raise ValueError("anonymous contributor must carry the sentinel username")
        else:
            if self.user_id is not None or self.username is not None or self.ip is not None:
                raise ValueError("deleted contributor carries no identity fields")

    @classmethod
    def registered(cls, username: str, user_id: Optional[int] = None) -> "Contributor":
        return cls(ContributorKind.REGISTERED, user_id=user_id, username=username)

    @classmethod
    def anonymous(cls, ip: str) -> "Contributor":
        return cls(ContributorKind.ANONYMOUS, ip=ip, username=ANONYMOUS_USERNAME)

    @classmethod
    def deleted(cls) -> "Contributor":
        return cls(ContributorKind.DELETED)

    def identity_string(self) -> str:
        """The string hashed by :func:`identifier`."""
        if self.kind is ContributorKind.DELETED:
            return DELETED_IDENTITY
        if self.kind is ContributorKind.ANONYMOUS:
            return ANONYMOUS_USERNAME
        return self.username


def identity_hash(s: str) -> int:
    """Positional byte hash: sum of b_k * k over UTF-8 bytes, 1-based index.

    Saturates at the signed 64-bit bounds so the value is identical on every
    platform (real usernames never get anywhere near the limit).
    """
    h = 0
    for k, b in enumerate(s.encode("utf-8"), start=1):
        h += b * k
    return max(_I64_MIN, min(_I64_MAX, h))


def identifier(c: Contributor) -> int:
    """Deterministic identity key for grouping and joining. Total over all kinds."""
    return identity_hash(c.identity_string())


#: Identifier shared by every anonymous contributor.
ANONYMOUS_IDENTIFIER = identity_hash(ANONYMOUS_USERNAME)

#: Identifier shared by every deleted contributor.
DELETED_IDENTIFIER = identity_hash(DELETED_IDENTITY)


def identity_matches(a: Contributor, b: Contributor) -> bool:
    """Whether two contributors count as the same author for skip rules.

    Mixed kinds never match. Registered pairs compare user ids when both are
    present (histories exist where distinct usernames share an id, and the id
    wins), otherwise usernames. Anonymous pairs match only on equal IPs;
    deleted pairs always match.
    """
    if a.kind is not b.kind:
        return False
    if a.kind is ContributorKind.DELETED:
        return True
    if a.kind is ContributorKind.ANONYMOUS:
        return a.ip == b.ip
    if a.user_id is not None and b.user_id is not None:
        return a.user_id == b.user_id
    return a.username == b.username


@dataclass(frozen=True)
class Revision:
    """One retained edit. ``within_page_id`` is 1-based over retained revisions."""

    id: int
    text: str
    contributor: Contributor
    within_page_id: int
    parent_id: Optional[int] = None
    timestamp: Optional[str] = None

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError("revision id must be positive")
        if self.within_page_id <= 0:
            raise ValueError("within_page_id must be positive")


@dataclass(frozen=True)
class Pageview:
    """Aggregated traffic record for one page title."""

    project_name: str
    page_title: str
    request_count: int
    request_size: int

    def __post_init__(self):
        if self.request_count < 0 or self.request_size < 0:
            raise ValueError("pageview counts must be non-negative")


@dataclass(frozen=True)
class Page:
    """One wiki article with its retained revision history."""

    id: int
    title: str
    namespace: int
    revisions: tuple[Revision, ...]
    pageview: Optional[Pageview] = None

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError("page id must be positive")
        for pos, rev in enumerate(self.revisions, start=1):
            if rev.within_page_id != pos:
                raise ValueError(
                    f"revision {rev.id}: within_page_id {rev.within_page_id}, expected {pos}"
                )


@dataclass(frozen=True)
class RelevanceScore:
    """(subject, score) pair; the unit every ranking and aggregation works on."""

    subject_id: int
    label: str
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score for subject {self.subject_id} is not finite: {self.score}")


@dataclass(frozen=True)
class DifferenceValue:
    """Optional numeric difference between two revisions; finite when present."""

    value: Optional[float] = None

    def __post_init__(self):
        if self.value is not None and not math.isfinite(self.value):
            raise ValueError("difference value must be finite")
