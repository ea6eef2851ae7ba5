"""Hand-built raw-throw fixtures.

``ANDERSON_BITS`` holds the 15 displayed legs of Gary Anderson's opening
throwing-success histories (blocks of three darts per turn, truncated at
the 180-point threshold).  ``anderson_raw_csv`` reconstructs a raw throw
log that preprocesses to exactly those bit strings: hits are high-value
segments, misses low-value ones, and the running score is kept at or above
180 for every displayed throw.  Leg 1 additionally carries a sub-180 tail
that the truncation rule must drop.
"""

from __future__ import annotations

ANDERSON_BITS = (
    "001011011",
    "1111100",
    "000111101",
    "01000010101",
    "000110101",
    "1110000100",
    "110100101",
    "10001001000",
    "1010100001",
    "110100101",
    "1011011",
    "0010110100",
    "00001001011",
    "000001000110",
    "000111100",
)

ANDERSON_LEG_LENGTHS = (9, 7, 9, 11, 9, 10, 9, 11, 10, 9, 7, 10, 11, 12, 9)

_SEGMENT_VALUES = {
    "T20": 60, "T19": 57, "T18": 54, "T17": 51, "T16": 48, "T15": 45,
    "BULL": 50, "25": 25, "MISS": 0,
    "S1": 1, "S5": 5, "S17": 17, "S20": 20, "D16": 32,
}

# legs other than the first cycle through a few different hit/miss segments
_HIT_CYCLE = ("T20", "T19", "T18", "BULL", "T17")
_MISS_CYCLE = ("S1", "MISS", "S5", "25", "D16")


def anderson_throws():
    """(player_id, leg_id, throw_index, segment, score_before) tuples."""
    rows = []
    player = "gary-anderson"
    for leg_no, bits in enumerate(ANDERSON_BITS, start=1):
        leg_id = f"leg-{leg_no:02d}"
        score = 501
        if leg_no == 1:
            # engineered so the last displayed throw drops the score below
            # the threshold, leaving room for a truncated tail
            hit, misses = "T20", "S17"
            for t, bit in enumerate(bits, start=1):
                segment = hit if bit == "1" else misses
                rows.append((player, leg_id, t, segment, score))
                score -= _SEGMENT_VALUES[segment]
            assert score < 180
            rows.append((player, leg_id, len(bits) + 1, "S20", score))
            score -= 20
            rows.append((player, leg_id, len(bits) + 2, "T19", score))
        else:
            for t, bit in enumerate(bits, start=1):
                if bit == "1":
                    segment = _HIT_CYCLE[(leg_no + t) % len(_HIT_CYCLE)]
                else:
                    segment = _MISS_CYCLE[(leg_no + t) % len(_MISS_CYCLE)]
                rows.append((player, leg_id, t, segment, score))
                score -= _SEGMENT_VALUES[segment]
                assert score >= 180 or t == len(bits)
    return rows


def anderson_raw_csv() -> str:
    lines = ["player_id,leg_id,throw_index,segment,score_before"]
    for row in anderson_throws():
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"
