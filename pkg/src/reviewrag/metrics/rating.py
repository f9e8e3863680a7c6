"""Rating extraction from generated text, and MAE / RMSE."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from reviewrag.errors import EmptyAfterExclusion

_WORDS = {"one": 1, "two": 2, "three": 3, "four": 4, "five": 5}

# A whole number not glued to letters, digits, or a decimal point; or a number word.
_CANDIDATE_RE = re.compile(
    r"(?<![\w.])(\d+)(?!\.\d)(?![\w])|\b(one|two|three|four|five)\b",
    re.IGNORECASE,
)


def parse_rating(generation: str) -> Optional[int]:
    """First standalone integer in 1..5, digits or English words. None when absent.

    >>> parse_rating("I'd rate this 4 out of 5")
    4
    >>> parse_rating("terrible product") is None
    True
    """
    if not generation:
        return None
    for m in _CANDIDATE_RE.finditer(generation):
        if m.group(1) is not None:
            value = int(m.group(1))
        else:
            value = _WORDS[m.group(2).lower()]
        if 1 <= value <= 5:
            return value
    return None


@dataclass(frozen=True)
class RatingScore:
    mae: float
    rmse: float
    n: int
    parse_failures: int


def mae_rmse(preds: Sequence[Optional[int]], targets: Sequence[int]) -> RatingScore:
    """Mean absolute and root-mean-square error; ``None`` predictions are excluded and counted."""
    if len(preds) != len(targets):
        raise ValueError(f"{len(preds)} predictions for {len(targets)} targets")
    pairs = [(p, t) for p, t in zip(preds, targets) if p is not None]
    failures = len(preds) - len(pairs)
    if not pairs:
        raise EmptyAfterExclusion(f"no parsable predictions ({failures} failures)")
    n = len(pairs)
    mae = sum(abs(p - t) for p, t in pairs) / n
    rmse = math.sqrt(sum((p - t) ** 2 for p, t in pairs) / n)
    return RatingScore(mae, rmse, n, failures)
