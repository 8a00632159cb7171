"""String similarity used to score suggested repairs.

The default measure is ``1 - levenshtein(a, b) / max(len(a), len(b))``,
which lands in [0, 1]; two empty strings count as identical.  Anything
with the same ``(str, str) -> float`` signature can be swapped in.

Repair sessions compare the same small vocabulary of cell values over
and over, so the default measure memoizes on the (unordered) pair.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

SimilarityFn = Callable[[str, str], float]

__all__ = ["levenshtein", "similarity", "SimilarityFn"]


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit-cost insert, delete, and substitute."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


@lru_cache(maxsize=1 << 20)
def _similarity_cached(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def similarity(a: str, b: str) -> float:
    if a > b:
        a, b = b, a
    return _similarity_cached(a, b)
