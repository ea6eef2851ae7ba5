"""File ingestion and serialization.

Raw throw logs are UTF-8 CSV with columns player_id, leg_id, throw_index,
segment, score_before (one row per dart).  Preprocessing keeps the prefix
of each leg where the remaining score is still at or above the truncation
threshold, codes a throw as success when it lands in the high-value target
set {T15..T20, BULL}, and drops players with too few retained legs.  "BULL"
is the inner bullseye; the outer ring has its own code "25" and does not
count as success.

Binary legs travel as JSONL, one object per line with keys player_id,
leg_id and bits (a string over 0/1); the round trip through save and load
is lossless.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from typing import Iterable

import numpy as np

from .core import Dataset, Leg, ThrowRecord

__all__ = [
    "ParseError",
    "StructureError",
    "SUCCESS_SEGMENTS",
    "read_raw_throws",
    "preprocess",
    "save_binary",
    "load_binary",
    "atomic_write_text",
]

SUCCESS_SEGMENTS = frozenset({"T15", "T16", "T17", "T18", "T19", "T20", "BULL"})

_SEGMENT_RE = re.compile(r"^(?:[SDT](?:[1-9]|1[0-9]|20)|BULL|25|MISS)$")

_RAW_FIELDS = ("player_id", "leg_id", "throw_index", "segment", "score_before")

_BITS_RE = re.compile(r"^[01]+$")


class ParseError(ValueError):
    """Malformed input file; carries the offending location when known."""

    def __init__(self, message: str, *, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructureError(ValueError):
    """Input parsed but violates the leg/turn structure rules."""


def read_raw_throws(path) -> list:
    """Parse a raw throw CSV into records, validating the segment vocabulary."""
    import csv

    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("raw throw file is empty", line=1)
        missing = [c for c in _RAW_FIELDS if c not in reader.fieldnames]
        if missing:
            raise ParseError(
                f"raw throw file is missing columns: {', '.join(missing)}", line=1
            )
        for row in reader:
            line = reader.line_num
            segment = (row["segment"] or "").strip().upper()
            if not _SEGMENT_RE.match(segment):
                raise ParseError(f"unknown segment code {row['segment']!r}", line=line)
            try:
                throw_index = int(row["throw_index"])
                score_before = int(row["score_before"])
            except (TypeError, ValueError):
                raise ParseError(
                    f"throw_index/score_before must be integers, got "
                    f"{row['throw_index']!r}/{row['score_before']!r}",
                    line=line,
                ) from None
            try:
                records.append(
                    ThrowRecord(
                        player_id=row["player_id"],
                        leg_id=row["leg_id"],
                        throw_index=throw_index,
                        segment=segment,
                        score_before=score_before,
                    )
                )
            except ValueError as exc:
                raise ParseError(str(exc), line=line) from None
    return records


def preprocess(
    records: Iterable[ThrowRecord], *, truncate_at: int = 180, min_legs: int = 50
) -> Dataset:
    """Turn raw throws into the binary analysis dataset.

    Keeps throws with ``score_before >= truncate_at`` (a prefix of each leg,
    enforced via the weakly decreasing score), codes success membership in
    the high-value target set, drops legs left empty, then drops players
    with fewer than ``min_legs`` retained legs.
    """
    grouped: dict = {}
    for rec in records:
        grouped.setdefault((rec.player_id, rec.leg_id), []).append(rec)

    legs = []
    for (player_id, leg_id), entries in sorted(grouped.items()):
        entries.sort(key=lambda r: r.throw_index)
        bits = []
        previous_score = None
        for i, rec in enumerate(entries):
            if rec.throw_index != i + 1:
                raise StructureError(
                    f"leg ({player_id}, {leg_id}): throw_index must be consecutive "
                    f"from 1, found {rec.throw_index} at position {i + 1}"
                )
            if previous_score is not None and rec.score_before > previous_score:
                raise StructureError(
                    f"leg ({player_id}, {leg_id}): score_before increases at throw "
                    f"{rec.throw_index} ({previous_score} -> {rec.score_before})"
                )
            previous_score = rec.score_before
            if rec.score_before >= truncate_at:
                bits.append(1 if rec.segment in SUCCESS_SEGMENTS else 0)
        if bits:
            legs.append(Leg(player_id=player_id, leg_id=leg_id, y=np.array(bits, dtype=np.int8)))

    retained_per_player: dict = {}
    for leg in legs:
        retained_per_player[leg.player_id] = retained_per_player.get(leg.player_id, 0) + 1
    kept = [leg for leg in legs if retained_per_player[leg.player_id] >= min_legs]
    if not kept:
        raise StructureError(
            f"no player retains at least {min_legs} non-empty legs after truncation"
        )
    return Dataset.from_legs(kept)


def save_binary(dataset: Dataset, path) -> None:
    """Write one JSON object per leg, in dataset order."""
    lines = [
        json.dumps(
            {"player_id": leg.player_id, "leg_id": leg.leg_id, "bits": leg.bits()},
            separators=(",", ":"),
        )
        for leg in dataset.legs
    ]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_binary(path) -> Dataset:
    """Read a JSONL leg file back into a dataset; schema-validates every line."""
    legs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", line=line_no) from None
            if not isinstance(obj, dict) or not {"player_id", "leg_id", "bits"} <= set(obj):
                raise ParseError(
                    "leg record must carry player_id, leg_id and bits", line=line_no
                )
            bits = obj["bits"]
            if not isinstance(bits, str) or not _BITS_RE.match(bits):
                raise ParseError(f"bits must be a nonempty 0/1 string, got {bits!r}", line=line_no)
            legs.append(
                Leg(
                    player_id=str(obj["player_id"]),
                    leg_id=str(obj["leg_id"]),
                    y=np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0"),
                )
            )
    if not legs:
        raise ParseError("leg file contains no legs")
    return Dataset.from_legs(legs)


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory plus rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
