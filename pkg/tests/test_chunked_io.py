"""Splittable bzip2 reading, page splitting, dedup, and the file merger."""

import bz2
import gzip
import random
import re
import shutil
import subprocess

import pytest

from conftest import dump_xml, fixture_pages, write_dump
from wikimpact import chunked_io
from wikimpact.errors import (
    CorruptBlock,
    EmptyDirectory,
    MalformedHeader,
    UnsplittableRecord,
    UnterminatedPage,
)


def compressible_text(rng, n_tokens):
    vocab = ["".join(rng.choices("abcdefghijklmnop", k=rng.randint(2, 9))) for _ in range(5000)]
    return (" ".join(rng.choices(vocab, k=n_tokens))).encode()


def bzip2_tvv_block_count(path):
    """Block count reported by the reference decoder, or None if unavailable."""
    exe = shutil.which("bzip2")
    if exe is None:
        return None
    proc = subprocess.run([exe, "-tvv", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return len([l for l in (proc.stdout + proc.stderr).splitlines() if re.match(r"\s*\[\d+: ", l)])


class TestScanBlocks:
    def test_single_block_file(self):
        data = bz2.compress(b"hello\n")
        index = chunked_io.scan_bzip2_blocks(data)
        assert len(index.offsets) == 1
        assert index.offsets[0] == 32  # right after the 4-byte stream header

    def test_concatenated_streams(self):
        data = bz2.compress(b"one\n" * 50) + bz2.compress(b"two\n" * 50)
        index = chunked_io.scan_bzip2_blocks(data)
        assert len(index.offsets) >= 2

    def test_block_count_matches_reference_decoder(self, tmp_path):
        rng = random.Random(20)
        text = compressible_text(rng, 1_400_000)  # ~10 MB
        path = tmp_path / "big.bz2"
        path.write_bytes(bz2.compress(text, 1))  # smallest block size: many blocks
        expected = bzip2_tvv_block_count(path)
        if expected is None:
            pytest.skip("bzip2 binary not available")
        index = chunked_io.scan_bzip2_blocks(path.read_bytes())
        assert len(index.offsets) == expected
        assert len(index.offsets) > 50

    def test_rejects_non_bzip2(self):
        with pytest.raises(MalformedHeader):
            chunked_io.scan_bzip2_blocks(b"PK\x03\x04 definitely a zip file")


class TestReadDecompressed:
    def test_bz2_parallelism_invariance(self, tmp_path):
        rng = random.Random(21)
        text = compressible_text(rng, 500_000)
        path = tmp_path / "data.bz2"
        path.write_bytes(bz2.compress(text, 1))
        seq = b"".join(chunked_io.read_decompressed(path, 1))
        par = b"".join(chunked_io.read_decompressed(path, 8))
        assert seq == text
        assert par == text

    def test_bz2_matches_reference_decoder(self, tmp_path):
        rng = random.Random(22)
        text = compressible_text(rng, 300_000)
        path = tmp_path / "data.bz2"
        path.write_bytes(bz2.compress(text, 1))
        assert b"".join(chunked_io.read_decompressed(path, 1)) == bz2.decompress(path.read_bytes())

    def test_multistream_bz2(self, tmp_path):
        part1, part2 = b"alpha\n" * 400, b"beta\n" * 400
        path = tmp_path / "multi.bz2"
        path.write_bytes(bz2.compress(part1, 9) + bz2.compress(part2, 5))
        assert b"".join(chunked_io.read_decompressed(path, 1)) == part1 + part2
        assert b"".join(chunked_io.read_decompressed(path, 3)) == part1 + part2

    def test_gzip(self, tmp_path):
        text = b"gzip payload\n" * 1000
        path = tmp_path / "data.gz"
        path.write_bytes(gzip.compress(text))
        assert b"".join(chunked_io.read_decompressed(path, 4)) == text

    def test_plain_passthrough(self, tmp_path):
        text = b"plain bytes"
        path = tmp_path / "data.xml"
        path.write_bytes(text)
        assert b"".join(chunked_io.read_decompressed(path, 4)) == text

    def test_corrupt_block_reports_ordinal(self, tmp_path):
        rng = random.Random(23)
        text = compressible_text(rng, 400_000)
        data = bytearray(bz2.compress(text, 1))
        index = chunked_io.scan_bzip2_blocks(bytes(data))
        assert len(index.offsets) >= 3
        # smash bytes inside the third block's payload
        third = index.offsets[2] // 8 + 30
        data[third:third + 8] = b"\x00" * 8
        path = tmp_path / "corrupt.bz2"
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptBlock) as err:
            b"".join(chunked_io.read_decompressed(path, 1))
        assert err.value.ordinal == 2

    def test_rejects_parallelism_zero(self, tmp_path):
        path = tmp_path / "x.bz2"
        path.write_bytes(bz2.compress(b"x"))
        with pytest.raises(ValueError):
            list(chunked_io.read_decompressed(path, 0))


class TestSplitPages:
    def test_two_pages(self):
        doc = b"<mediawiki><page>A</page><page>B</page></mediawiki>"
        assert list(chunked_io.split_pages([doc])) == ["<page>A</page>", "<page>B</page>"]

    def test_no_pages(self):
        assert list(chunked_io.split_pages([b"<mediawiki><siteinfo/></mediawiki>"])) == []

    def test_attributed_page_tag(self):
        doc = b'<page foo="1">X</page>'
        assert list(chunked_io.split_pages([doc])) == ['<page foo="1">X</page>']

    def test_chunk_boundaries_anywhere(self):
        doc = dump_xml(fixture_pages()).encode()
        whole = list(chunked_io.split_pages([doc]))
        for size in (1, 3, 7, 64, 1024):
            chunks = [doc[i:i + size] for i in range(0, len(doc), size)]
            assert list(chunked_io.split_pages(chunks)) == whole

    def test_record_count_matches_grep_oracle(self):
        doc = dump_xml(fixture_pages()).encode()
        records = list(chunked_io.split_pages([doc]))
        assert len(records) == doc.count(b"<page>")

    def test_unterminated_page(self):
        with pytest.raises(UnterminatedPage):
            list(chunked_io.split_pages([b"<page>never closed"]))

    def test_oversized_record_rejected_with_title(self, monkeypatch):
        monkeypatch.setattr(chunked_io, "MAX_RECORD_BYTES", 64)
        doc = b"<page><title>Huge Article</title>" + b"x" * 200
        with pytest.raises(UnsplittableRecord) as err:
            list(chunked_io.split_pages([doc]))
        assert "Huge Article" in str(err.value)


class TestDedupRecords:
    def test_first_occurrence_wins(self):
        assert list(chunked_io.dedup_records(["P1", "P2", "P1"])) == ["P1", "P2"]

    def test_all_distinct_unchanged(self):
        records = [f"<page>{i}</page>" for i in range(10)]
        assert list(chunked_io.dedup_records(records)) == records

    def test_idempotent(self):
        records = ["a", "b", "a", "c", "b"]
        once = list(chunked_io.dedup_records(records))
        assert list(chunked_io.dedup_records(once)) == once

    def test_parallel_split_matches_sequential_oracle(self, tmp_path):
        path = write_dump(tmp_path, fixture_pages(), codec="bz2")
        sequential = list(
            chunked_io.split_pages([bz2.decompress(path.read_bytes())])
        )
        parallel = list(
            chunked_io.dedup_records(
                chunked_io.split_pages(chunked_io.read_decompressed(path, 4))
            )
        )
        assert parallel == sequential


class TestMergeFiles:
    def test_three_one_line_files(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        (src / "b.txt").write_text("second\n")
        (src / "a.txt").write_text("first\n")
        (src / "c.txt").write_text("third\n")
        out = tmp_path / "merged.txt"
        report = chunked_io.merge_files(src, out)
        assert report.files_read == 3
        assert report.lines_written == 3
        assert out.read_text() == "first\nsecond\nthird\n"

    def test_gzip_round_trip(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        (src / "pagecounts-20170201-000000.gz").write_bytes(gzip.compress(b"aa A 1 10\n"))
        (src / "pagecounts-20170201-010000.gz").write_bytes(gzip.compress(b"aa B 2 20\n"))
        out = tmp_path / "merged.gz"
        report = chunked_io.merge_files(src, out, codec="gzip")
        assert report.lines_written == 2
        lines = b"".join(chunked_io.read_decompressed(out, 1))
        assert lines == b"aa A 1 10\naa B 2 20\n"

    def test_bzip2_codec_round_trip(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        (src / "one.txt").write_text("x 1\n")
        out = tmp_path / "merged.bz2"
        chunked_io.merge_files(src, out, codec="bzip2")
        assert b"".join(chunked_io.read_decompressed(out, 2)) == b"x 1\n"

    def test_missing_trailing_newline_preserved_as_line(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        (src / "a.txt").write_text("no newline")
        (src / "b.txt").write_text("after\n")
        out = tmp_path / "merged.txt"
        report = chunked_io.merge_files(src, out)
        assert out.read_text() == "no newline\nafter\n"
        assert report.lines_written == 2

    def test_empty_directory(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        with pytest.raises(EmptyDirectory):
            chunked_io.merge_files(src, tmp_path / "out.txt")

    def test_byte_totals(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        (src / "a.txt").write_text("abc\n")
        out = tmp_path / "merged.txt"
        report = chunked_io.merge_files(src, out)
        assert report.bytes_in == 4
        assert report.bytes_out == 4
