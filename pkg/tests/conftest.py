"""Shared fixtures: synthetic dump builders and random history generators."""

import bz2
import gzip
import random

import pytest

from wikimpact.model import Contributor


def xml_escape(value: str) -> str:
    return (
        value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def contributor_xml(desc) -> str:
    """desc: ("registered", username, user_id|None) | ("anon", ip) | ("deleted",)."""
    kind = desc[0]
    if kind == "deleted":
        return '      <contributor deleted="deleted" />'
    if kind == "anon":
        return (
            "      <contributor>\n"
            f"        <ip>{xml_escape(desc[1])}</ip>\n"
            "      </contributor>"
        )
    username, user_id = desc[1], desc[2]
    lines = ["      <contributor>", f"        <username>{xml_escape(username)}</username>"]
    if user_id is not None:
        lines.append(f"        <id>{user_id}</id>")
    lines.append("      </contributor>")
    return "\n".join(lines)


def revision_xml(rev: dict) -> str:
    """rev keys: id, text, contributor; optional parentid, timestamp."""
    lines = ["    <revision>", f"      <id>{rev['id']}</id>"]
    if rev.get("parentid") is not None:
        lines.append(f"      <parentid>{rev['parentid']}</parentid>")
    lines.append(f"      <timestamp>{rev.get('timestamp', '2017-05-01T00:00:00Z')}</timestamp>")
    lines.append(contributor_xml(rev["contributor"]))
    lines.append("      <comment>edit</comment>")
    lines.append("      <model>wikitext</model>")
    lines.append("      <format>text/x-wiki</format>")
    text = rev["text"]
    if text:
        lines.append(f'      <text xml:space="preserve">{xml_escape(text)}</text>')
    else:
        lines.append('      <text xml:space="preserve" />')
    lines.append("      <sha1>deadbeef</sha1>")
    lines.append("    </revision>")
    return "\n".join(lines)


def page_xml(page: dict) -> str:
    """page keys: id, title, ns, revisions; optional redirect."""
    lines = [
        "  <page>",
        f"    <title>{xml_escape(page['title'])}</title>",
        f"    <ns>{page.get('ns', 0)}</ns>",
        f"    <id>{page['id']}</id>",
    ]
    if page.get("redirect"):
        lines.append(f'    <redirect title="{xml_escape(page.get("redirect_to", "Elsewhere"))}" />')
    for rev in page["revisions"]:
        lines.append(revision_xml(rev))
    lines.append("  </page>")
    return "\n".join(lines)


def dump_xml(pages) -> str:
    body = "\n".join(page_xml(p) for p in pages)
    return (
        '<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/" version="0.10" xml:lang="aa">\n'
        "  <siteinfo>\n"
        "    <sitename>Testwiki</sitename>\n"
        "    <dbname>testwiki</dbname>\n"
        "  </siteinfo>\n"
        f"{body}\n"
        "</mediawiki>\n"
    )


def write_dump(tmp_path, pages, codec="bz2", name="testwiki-pages-meta-history.xml"):
    raw = dump_xml(pages).encode("utf-8")
    if codec == "bz2":
        path = tmp_path / (name + ".bz2")
        path.write_bytes(bz2.compress(raw, 9))
    elif codec == "gz":
        path = tmp_path / (name + ".gz")
        path.write_bytes(gzip.compress(raw))
    else:
        path = tmp_path / name
        path.write_bytes(raw)
    return path


# --- canonical fixture page set --------------------------------------------

def reg(username, user_id=None):
    return ("registered", username, user_id)


def anon(ip):
    return ("anon", ip)


DELETED = ("deleted",)


def fixture_pages():
    """Deterministic page set exercising every parsing and skip rule."""
    return [
        {
            "id": 1, "title": "Alpha", "ns": 0,
            "revisions": [
                {"id": 11, "text": "the quick brown fox", "contributor": reg("Alice", 1)},
                {"id": 12, "parentid": 11, "text": "the quick brown fox jumps",
                 "contributor": reg("Bob", 2)},
                {"id": 13, "parentid": 12, "text": "the quick red fox jumps high",
                 "contributor": reg("Alice", 1)},
            ],
        },
        {
            # consecutive edits by one author collapse to the final state
            "id": 2, "title": "Beta", "ns": 0,
            "revisions": [
                {"id": 21, "text": "draft one", "contributor": reg("Carol", 3)},
                {"id": 22, "parentid": 21, "text": "draft two", "contributor": reg("Carol", 3)},
                {"id": 23, "parentid": 22, "text": "draft three final", "contributor": reg("Carol", 3)},
                {"id": 24, "parentid": 23, "text": "draft three final polished",
                 "contributor": reg("Dave", 4)},
            ],
        },
        {
            # same user id under different names: id comparison wins, earlier drops
            "id": 3, "title": "Gamma", "ns": 0,
            "revisions": [
                {"id": 31, "text": "peukeureujuen", "contributor": reg("Lam Tamot", 0)},
                {"id": 32, "parentid": 31, "text": "peukeureujuen got", "contributor": reg("Keuramat", 0)},
                {"id": 33, "parentid": 32, "text": "peukeureujuen got sigom", "contributor": anon("1.2.3.4")},
            ],
        },
        {
            # anonymous edits: equal IPs collapse, distinct IPs stay
            "id": 4, "title": "Delta", "ns": 0,
            "revisions": [
                {"id": 41, "text": "first pass", "contributor": anon("10.0.0.1")},
                {"id": 42, "parentid": 41, "text": "second pass", "contributor": anon("10.0.0.1")},
                {"id": 43, "parentid": 42, "text": "third pass", "contributor": anon("10.0.0.2")},
                {"id": 44, "parentid": 43, "text": "fourth pass", "contributor": DELETED},
                {"id": 45, "parentid": 44, "text": "fifth pass", "contributor": DELETED},
            ],
        },
        {
            # escapes and chunked character data: entities split SAX callbacks
            "id": 5, "title": "Epsilon & Friends", "ns": 0,
            "revisions": [
                {"id": 51, "text": 'x < y && y > "z"\nsecond line\tof text\nthird <line>',
                 "contributor": reg("Eve", 5)},
                {"id": 52, "parentid": 51, "text": "", "contributor": reg("Frank", 6)},
            ],
        },
        {
            # redirect with a colon in the title: excluded entirely
            "id": 6, "title": "Wikipedia:About", "ns": 4, "redirect": True,
            "revisions": [
                {"id": 61, "text": "#REDIRECT [[About]]", "contributor": reg("Alice", 1)},
            ],
        },
        {
            # redirect without a colon: kept
            "id": 7, "title": "Zeta", "ns": 0, "redirect": True,
            "revisions": [
                {"id": 71, "text": "#REDIRECT [[Alpha]]", "contributor": reg("Bob", 2)},
            ],
        },
        {
            # colon without a redirect: kept (non-main namespace)
            "id": 8, "title": "Talk:Alpha", "ns": 1,
            "revisions": [
                {"id": 81, "text": "discussion goes here", "contributor": reg("Carol", 3)},
                {"id": 82, "parentid": 81, "text": "discussion continues", "contributor": anon("10.0.0.9")},
            ],
        },
        {
            # unicode title and text
            "id": 9, "title": "Café", "ns": 0,
            "revisions": [
                {"id": 91, "text": "żółć straße καφές", "contributor": reg("Grü Ber", 7)},
            ],
        },
    ]


@pytest.fixture(scope="session")
def fixture_dump_bz2(tmp_path_factory):
    return write_dump(tmp_path_factory.mktemp("dump"), fixture_pages(), codec="bz2")


@pytest.fixture(scope="session")
def fixture_dump_plain(tmp_path_factory):
    return write_dump(tmp_path_factory.mktemp("dump"), fixture_pages(), codec="none")


# --- random generators -------------------------------------------------------

CONTRIBUTOR_POOL = [
    reg("UserA", 1),
    reg("UserA", 1),
    reg("UserB", 2),
    reg("UserB", None),
    reg("UserC", None),
    reg("AliasOfB", 2),   # same id as UserB, different name
    reg("UserD", 0),
    reg("UserE", 0),      # shares id 0 with UserD
    anon("1.1.1.1"),
    anon("1.1.1.1"),
    anon("2.2.2.2"),
    DELETED,
    DELETED,
]

TITLE_POOL = ["Plain", "Other", "Talk:Thing", "Project:Help", "Main Page"]
VOCAB = ["alpha", "beta", "gamma", "delta", "w1", "w2"]


def random_history(rng: random.Random, page_id: int) -> dict:
    n_revs = rng.randint(1, 8)
    revisions = []
    for k in range(n_revs):
        revisions.append({
            "id": page_id * 1000 + k + 1,
            "parentid": page_id * 1000 + k if k else None,
            "text": " ".join(rng.choices(VOCAB, k=rng.randint(0, 6))),
            "contributor": rng.choice(CONTRIBUTOR_POOL),
        })
    return {
        "id": page_id,
        "title": rng.choice(TITLE_POOL),
        "ns": rng.choice([0, 0, 0, 1, 4]),
        "redirect": rng.random() < 0.25,
        "revisions": revisions,
    }


def contributor_from_tuple(desc) -> Contributor:
    if desc[0] == "deleted":
        return Contributor.deleted()
    if desc[0] == "anon":
        return Contributor.anonymous(desc[1])
    return Contributor.registered(desc[1], desc[2])


def random_token_history(rng: random.Random, max_revisions=5, max_tokens=6):
    """Texts only, for measure oracle comparisons."""
    n = rng.randint(1, max_revisions)
    return [" ".join(rng.choices(VOCAB, k=rng.randint(0, max_tokens))) for _ in range(n)]
