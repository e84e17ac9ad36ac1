"""Compressed-input ingestion and page-boundary record splitting.

bzip2 stores independent compressed blocks delimited by a 48-bit magic
pattern; the pattern is bit-aligned, not byte-aligned, so candidate block
starts are located by an 8-shift byte scan and each block is decoded on its
own by wrapping its bits in a synthetic single-block stream. Because the
magic can in principle occur inside compressed payload, every candidate is
validated by attempting the decode; failed candidates are merged into the
preceding block.
"""

from __future__ import annotations

import bisect
import bz2
import gzip
import hashlib
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import (
    CorruptBlock,
    EmptyDirectory,
    MalformedHeader,
    UnsplittableRecord,
    UnterminatedPage,
)

BLOCK_MAGIC = 0x314159265359
STREAM_END_MAGIC = 0x177245385090

#: One complete "<page>...</page>" fragment, exactly as cut from the dump.
RawPageRecord = str

#: Hard cap on a single page record; larger records abort with context instead
#: of exhausting memory.
MAX_RECORD_BYTES = 2 * 1024**3

_READ_CHUNK = 1 << 20


@dataclass(frozen=True)
class BlockIndex:
    """Bit offsets of candidate compressed-block starts within a bzip2 stream."""

    offsets: tuple[int, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.offsets, self.offsets[1:])):
            raise ValueError("block offsets must be strictly increasing")


def _scan_magic_shift(data: bytes, magic: int, shift: int) -> list[int]:
    """Bit offsets of the 48-bit magic at one of the 8 possible bit alignments."""
    hits: list[int] = []
    n = len(data)
    if shift == 0:
        aligned = magic.to_bytes(6, "big")
        pos = data.find(aligned)
        while pos != -1:
            hits.append(pos * 8)
            pos = data.find(aligned, pos + 1)
        return hits
    window = magic << (8 - shift)  # magic placed at bit `shift` of a 7-byte window
    middle = ((window >> 8) & ((1 << 40) - 1)).to_bytes(5, "big")
    head = window >> 48
    head_mask = (1 << (8 - shift)) - 1
    tail = window & 0xFF
    tail_mask = (0xFF << (8 - shift)) & 0xFF
    pos = data.find(middle, 1)
    while pos != -1:
        i = pos - 1
        if i + 6 < n and (data[i] & head_mask) == (head & head_mask) \
                and (data[i + 6] & tail_mask) == (tail & tail_mask):
            hits.append(i * 8 + shift)
        pos = data.find(middle, pos + 1)
    return hits


def _scan_magic(data: bytes, magic: int) -> list[int]:
    """Every bit offset at which the 48-bit magic occurs (not byte-aligned)."""
    hits: list[int] = []
    for shift in range(8):
        hits.extend(_scan_magic_shift(data, magic, shift))
    hits.sort()
    return hits


def _check_bzip2_header(data: bytes) -> None:
    if len(data) < 10 or data[:3] != b"BZh" or not (0x31 <= data[3] <= 0x39):
        raise MalformedHeader("input does not start with a bzip2 stream header")


def scan_bzip2_blocks(data: bytes) -> BlockIndex:
    """Locate every candidate block start in an in-memory bzip2 stream."""
    _check_bzip2_header(data)
    return BlockIndex(offsets=tuple(_scan_magic(data, BLOCK_MAGIC)))


def _extract_bits(data: bytes, start: int, end: int) -> tuple[int, int]:
    """Bits [start, end) of data as (value, bit count)."""
    b0, b1 = start // 8, (end + 7) // 8
    value = int.from_bytes(data[b0:b1], "big")
    value >>= b1 * 8 - end
    nbits = end - start
    return value & ((1 << nbits) - 1), nbits


def decode_block(data: bytes, start_bit: int, end_bit: int) -> bytes:
    """Decode one compressed block given its bit range.

    The block's bits are wrapped in a synthetic single-block stream: a fresh
    header, the block itself, and an end-of-stream record whose combined CRC
    for a single block equals the block CRC stored in bits 48..80 of the
    block. libbz2 then verifies both CRCs during decompression.
    """
    bits, nbits = _extract_bits(data, start_bit, end_bit)
    if nbits < 80:
        raise ValueError("candidate block region too small")
    block_crc = (bits >> (nbits - 80)) & 0xFFFFFFFF
    total = nbits + 48 + 32
    pad = (-total) % 8
    assembled = (bits << (48 + 32 + pad)) | (STREAM_END_MAGIC << (32 + pad)) | (block_crc << pad)
    return bz2.decompress(b"BZh9" + assembled.to_bytes((total + pad) // 8, "big"))


def _candidate_layout(data: bytes) -> tuple[list[int], list[int]]:
    """Candidate block starts plus all boundaries a block may end on.

    Boundaries are the starts of later blocks, end-of-stream markers, and EOF;
    in a well-formed stream the bits between consecutive boundaries are exactly
    one block.
    """
    starts = _scan_magic(data, BLOCK_MAGIC)
    eos = _scan_magic(data, STREAM_END_MAGIC)
    bounds = sorted(set(starts) | set(eos))
    bounds.append(len(data) * 8)
    return starts, bounds


def _decode_validated(data: bytes, start: int, bounds: list[int], ordinal: int) -> tuple[bytes, int]:
    """Decode the block at `start`, merging past false boundaries until it parses.

    Returns the decompressed bytes and the boundary the block actually ended
    on. Raises CorruptBlock when no end makes the region decodable.
    """
    for k in range(bisect.bisect_right(bounds, start), len(bounds)):
        end = bounds[k]
        try:
            return decode_block(data, start, end), end
        except (OSError, EOFError, ValueError):
            continue
    raise CorruptBlock(ordinal)


_worker_fd = None
_worker_cache: bytes | None = None


def _pool_init(path: str) -> None:
    global _worker_fd, _worker_cache
    _worker_fd = os.open(path, os.O_RDONLY)
    _worker_cache = None


def _worker_bytes() -> bytes:
    global _worker_cache
    if _worker_cache is None:
        _worker_cache = os.pread(_worker_fd, os.fstat(_worker_fd).st_size, 0)
    return _worker_cache


def _pool_scan(task: tuple[int, int]) -> list[int]:
    magic, shift = task
    return _scan_magic_shift(_worker_bytes(), magic, shift)


def _pool_decode(region: tuple[int, int]) -> bytes | None:
    start, end = region
    b0 = start // 8
    raw = os.pread(_worker_fd, (end + 7) // 8 - b0, b0)
    try:
        return decode_block(raw, start - b0 * 8, end - b0 * 8)
    except (OSError, EOFError, ValueError):
        return None  # candidate rejected; parent re-merges sequentially


def iter_bzip2_blocks(data: bytes) -> Iterator[bytes]:
    """Decompressed content of each block, in order, each decoded independently."""
    _check_bzip2_header(data)
    starts, bounds = _candidate_layout(data)
    i = 0
    decoded = 0
    while i < len(starts):
        out, end = _decode_validated(data, starts[i], bounds, decoded)
        decoded += 1
        yield out
        i = bisect.bisect_left(starts, end)


def _iter_bzip2_blocks_pooled(path: Path, parallelism: int) -> Iterator[bytes]:
    """Pooled variant: both the magic scan and block decodes run in workers.

    The compressed bytes are only loaded in the parent on the rare fallback
    path (a candidate that fails to decode and needs boundary merging).
    """
    end_bits = path.stat().st_size * 8
    with ProcessPoolExecutor(
        max_workers=parallelism, initializer=_pool_init, initargs=(str(path),)
    ) as pool:
        scan_tasks = [(BLOCK_MAGIC, s) for s in range(8)] + [(STREAM_END_MAGIC, s) for s in range(8)]
        scan_hits = list(pool.map(_pool_scan, scan_tasks))
        starts = sorted(h for hits in scan_hits[:8] for h in hits)
        eos = sorted(h for hits in scan_hits[8:] for h in hits)
        bounds = sorted(set(starts) | set(eos))
        bounds.append(end_bits)
        regions = [(s, bounds[bisect.bisect_right(bounds, s)]) for s in starts]

        chunksize = max(1, len(regions) // (parallelism * 8))
        results = pool.map(_pool_decode, regions, chunksize=chunksize)
        watermark = 0  # regions starting below this were consumed by a merge
        decoded = 0
        fallback_data: bytes | None = None
        for index, out in enumerate(results):
            if regions[index][0] < watermark:
                continue
            if out is None:
                if fallback_data is None:
                    fallback_data = path.read_bytes()
                out, end = _decode_validated(fallback_data, regions[index][0], bounds, decoded)
                watermark = end
            decoded += 1
            yield out


def read_decompressed(path: str | os.PathLike, parallelism: int = 1) -> Iterator[bytes]:
    """Stream the decompressed bytes of a file; codec chosen by suffix.

    ".bz2" decodes blocks concurrently (`parallelism` worker processes) and
    reassembles them in order, so output is byte-identical to a sequential
    decode. ".gz" streams through gzip; anything else is passed through.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be positive")
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".bz2":
        if parallelism == 1:
            data = p.read_bytes()
            _check_bzip2_header(data)
            yield from iter_bzip2_blocks(data)
        else:
            with open(p, "rb") as fh:
                _check_bzip2_header(fh.read(16))
            yield from _iter_bzip2_blocks_pooled(p, parallelism)
    elif suffix == ".gz":
        with gzip.open(p, "rb") as fh:
            while chunk := fh.read(_READ_CHUNK):
                yield chunk
    else:
        with open(p, "rb") as fh:
            while chunk := fh.read(_READ_CHUNK):
                yield chunk


_PAGE_OPEN = re.compile(rb"<page[ >]")
_PAGE_CLOSE = b"</page>"
_TITLE_SNIPPET = re.compile(rb"<title>(.{0,200}?)</title>", re.S)


def split_pages(chunks: Iterable[bytes]) -> Iterator[str]:
    """Cut a decompressed dump into complete "<page>...</page>" fragments.

    Purely textual: matches the literal tag bytes, which is sound because all
    revision text in a dump is XML-escaped. Content between pages (site info,
    the outer document element) is discarded.
    """
    buf = bytearray()
    in_page = False
    scanned = 0  # search resumes here when the next chunk arrives
    for chunk in chunks:
        buf += chunk
        pos = scanned
        while True:
            if not in_page:
                m = _PAGE_OPEN.search(buf, pos)
                if m is None:
                    # keep a small tail in case the open tag straddles chunks
                    keep = min(len(buf), 8)
                    del buf[: len(buf) - keep]
                    scanned = 0
                    break
                del buf[: m.start()]  # page starts at offset 0 from here on
                in_page = True
                pos = 6  # len(b"<page")+1, safely before any content
            else:
                end = buf.find(_PAGE_CLOSE, pos)
                if end == -1:
                    if len(buf) > MAX_RECORD_BYTES:
                        title = _TITLE_SNIPPET.search(buf, 0, 4096)
                        hint = title.group(1).decode("utf-8", "replace") if title else "unknown title"
                        raise UnsplittableRecord(
                            f"page record exceeds {MAX_RECORD_BYTES} bytes ({hint})"
                        )
                    scanned = max(0, len(buf) - len(_PAGE_CLOSE))
                    break
                stop = end + len(_PAGE_CLOSE)
                yield bytes(buf[:stop]).decode("utf-8")
                del buf[:stop]
                in_page = False
                pos = 0
    if in_page:
        raise UnterminatedPage("end of input inside a page record")


def dedup_records(records: Iterable[str]) -> Iterator[str]:
    """Drop exact duplicate fragments, keeping first occurrences in order.

    Duplicates are detected by 128-bit content digest so the seen-set stays
    small even for dumps with millions of pages.
    """
    seen: set[bytes] = set()
    for record in records:
        digest = hashlib.blake2b(record.encode("utf-8"), digest_size=16).digest()
        if digest in seen:
            continue
        seen.add(digest)
        yield record


@dataclass(frozen=True)
class MergeReport:
    files_read: int
    lines_written: int
    bytes_in: int
    bytes_out: int


MERGE_CODECS = ("none", "gzip", "bzip2")


def merge_files(input_dir: str | os.PathLike, output: str | os.PathLike,
                codec: str = "none") -> MergeReport:
    """Concatenate every file in a directory into one optionally compressed output.

    Inputs are taken in lexicographic filename order (hourly traffic files
    embed their timestamp, so this is chronological); ".gz" inputs are
    decompressed on the fly. Files not ending in a newline get one, so line
    boundaries survive concatenation.
    """
    if codec not in MERGE_CODECS:
        raise ValueError(f"unknown codec {codec!r}")
    in_dir = Path(input_dir)
    files = sorted(p for p in in_dir.iterdir() if p.is_file())
    if not files:
        raise EmptyDirectory(f"no input files in {in_dir}")

    out_path = Path(output)
    if codec == "gzip":
        sink = gzip.open(out_path, "wb")
    elif codec == "bzip2":
        sink = bz2.open(out_path, "wb")
    else:
        sink = open(out_path, "wb")

    lines = 0
    bytes_in = 0
    with sink:
        for path in files:
            bytes_in += path.stat().st_size
            opener = gzip.open if path.suffix == ".gz" else open
            last = b""
            with opener(path, "rb") as fh:
                while chunk := fh.read(_READ_CHUNK):
                    lines += chunk.count(b"\n")
                    sink.write(chunk)
                    last = chunk
            if last and not last.endswith(b"\n"):
                sink.write(b"\n")
                lines += 1
    return MergeReport(
        files_read=len(files),
        lines_written=lines,
        bytes_in=bytes_in,
        bytes_out=out_path.stat().st_size,
    )
