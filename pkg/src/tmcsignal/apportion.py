"""Largest-remainder apportionment of an integer total across fractional quotas."""

from __future__ import annotations

import math
from typing import Sequence


def largest_remainder(quotas: Sequence[float], total: int) -> list[int]:
    """Integerize ``quotas`` so the result sums to ``total`` exactly.

    Each quota is floored, then the leftover units go to the largest fractional
    parts; ties are broken by position (earliest first), which keeps the result
    deterministic. If the quotas under-fill the total (callers may clamp
    negative quotas to zero) the distribution wraps around in the same order.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    if any(q < 0 for q in quotas):
        raise ValueError("quotas must be non-negative")
    if not quotas:
        if total:
            raise ValueError("cannot apportion a positive total over no quotas")
        return []
    floors = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(floors)
    if leftover < 0:
        raise ValueError("quotas exceed the total being apportioned")
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for k in range(leftover):
        floors[order[k % len(quotas)]] += 1
    return floors


def proportional_split(weights: Sequence[float], total: int) -> list[int]:
    """Split ``total`` into integer parts proportional to ``weights`` (largest remainder)."""
    s = sum(weights)
    if s <= 0:
        if total == 0:
            return [0] * len(weights)
        raise ValueError("weights must have a positive sum")
    return largest_remainder([w / s * total for w in weights], total)
