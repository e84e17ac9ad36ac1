"""wikimpact: author impact rankings from wiki edit-history dumps.

Library layout mirrors the pipeline: compressed ingestion (:mod:`chunked_io`),
dump parsing (:mod:`wikidump`), traffic data (:mod:`pageviews`), contribution
measures (:mod:`measures`), score algebra and ranking (:mod:`scores`),
measurement arithmetic (:mod:`bench`), orchestration (:mod:`pipeline`) and the
CLI (:mod:`cli`).
"""

from .model import (
    ANONYMOUS_IDENTIFIER,
    ANONYMOUS_USERNAME,
    DELETED_IDENTITY,
    Contributor,
    ContributorKind,
    DifferenceValue,
    Page,
    Pageview,
    RelevanceScore,
    Revision,
    identifier,
    identity_matches,
)

__version__ = "0.1.0"

__all__ = [
    "ANONYMOUS_IDENTIFIER",
    "ANONYMOUS_USERNAME",
    "DELETED_IDENTITY",
    "Contributor",
    "ContributorKind",
    "DifferenceValue",
    "Page",
    "Pageview",
    "RelevanceScore",
    "Revision",
    "identifier",
    "identity_matches",
    "__version__",
]
