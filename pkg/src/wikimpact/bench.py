"""Measurement arithmetic for reports: compression factor, throughput, speed-up.

Includes parsers for the clock notations used in measurement tables
("h:mm:ss", "m:ss.cc", plain seconds) so recorded timings can be fed back in
directly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import InvalidSample


@dataclass(frozen=True)
class BenchSample:
    """Sizes in MB, elapsed wall time in ms, and the codec's compression factor.

    ``compression_factor`` is 1 for uncompressed input.
    """

    decompressed_mb: float
    compressed_mb: float
    elapsed_ms: float
    compression_factor: float = 1.0

    def __post_init__(self):
        if self.decompressed_mb <= 0 or self.compressed_mb <= 0:
            raise InvalidSample("sizes must be positive")
        if self.elapsed_ms <= 0:
            raise InvalidSample("elapsed time must be positive")
        if self.compression_factor <= 0:
            raise InvalidSample("compression factor must be positive")


def compression_factor(s: BenchSample) -> float:
    """Decompressed size over compressed size."""
    return s.decompressed_mb / s.compressed_mb


def throughput(s: BenchSample) -> float:
    """Effective MB/s: on-disk size scaled by the compression factor.

    (compressed_mb * 1000 / elapsed_ms) * compression_factor; compressed
    input that expands during the run counts at its decompressed volume.
    """
    return (s.compressed_mb * 1000.0 / s.elapsed_ms) * s.compression_factor


def speedup_percent(t_reference_s: float, t_candidate_s: float) -> float:
    """Relative speed-up of candidate vs reference, in percent.

    Positive means the candidate is faster; 0 means equal times.
    """
    if t_reference_s <= 0 or t_candidate_s <= 0:
        raise InvalidSample("times must be positive")
    return (t_reference_s / t_candidate_s - 1.0) * 100.0


def parse_clock(text: str) -> float:
    """Parse "h:mm:ss", "m:ss.cc" or plain seconds (optional h/m/s suffix) to seconds."""
    cleaned = text.strip()
    if cleaned and cleaned[-1] in "hms":
        cleaned = cleaned[:-1]
    parts = cleaned.split(":")
    if len(parts) == 3:
        h, m, s = parts
        return int(h) * 3600 + int(m) * 60 + float(s)
    if len(parts) == 2:
        m, s = parts
        return int(m) * 60 + float(s)
    return float(cleaned)


def format_table(headers: list[str], rows: list[list[str]]) -> str:
    """Render rows as an aligned plain-text table."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(headers))).rstrip(),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def format_csv(headers: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buf.getvalue()
