"""High-risk flagging: top-fraction selection with per-group capture rates."""

from __future__ import annotations

from dataclasses import dataclass

from ..cohort import EVENT_GROUPS, CancerGroup
from .metrics import LabeledScores


@dataclass
class FlaggingResult:
    fraction: float
    flagged_ids: list[str]
    capture_rates: dict[str, float]  # group -> flagged events / total events
    group_totals: dict[str, int]


def flag_top_fraction(scores: LabeledScores, fraction: float) -> FlaggingResult:
    """Flag the floor(fraction*N) highest-scoring women.

    Ordering is by descending score with ascending woman_id as the tie-break,
    so flagged sets are deterministic and nested across fractions.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    n_flag = int(fraction * len(scores.entries))
    ranked = sorted(scores.entries, key=lambda e: (-e[1], e[0]))
    flagged = ranked[:n_flag]
    flagged_ids = [w for w, _, _ in flagged]

    capture: dict[str, float] = {}
    totals: dict[str, int] = {}
    for group in (*EVENT_GROUPS, CancerGroup.HEALTHY):
        total = sum(1 for _, _, g in scores.entries if g is group)
        caught = sum(1 for _, _, g in flagged if g is group)
        totals[group.value] = total
        capture[group.value] = caught / total if total else 0.0
    return FlaggingResult(fraction=fraction, flagged_ids=flagged_ids,
                          capture_rates=capture, group_totals=totals)
