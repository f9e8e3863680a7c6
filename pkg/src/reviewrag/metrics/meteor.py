"""METEOR with exact and Porter-stem matching stages (no synonym stage)."""

from typing import Callable, Sequence

from reviewrag.metrics.porter import stem as porter_stem
from reviewrag.text import tokenize

ALPHA = 0.9
BETA = 3.0
GAMMA = 0.5


def _match_stage(cand: list, ref: list, key: Callable[[str], str]):
    """Pair unmatched (index, word) entries whose keys are equal.

    Candidate words are visited right to left and each takes the rightmost
    still-free reference word with the same key.
    """
    free: dict[str, list[int]] = {}
    for j, (_, w) in enumerate(ref):
        free.setdefault(key(w), []).append(j)
    pairs, used_c, used_r = [], set(), set()
    for i in range(len(cand) - 1, -1, -1):
        slots = free.get(key(cand[i][1]))
        if slots:
            j = slots.pop()
            pairs.append((cand[i][0], ref[j][0]))
            used_c.add(i)
            used_r.add(j)
    rest_c = [e for i, e in enumerate(cand) if i not in used_c]
    rest_r = [e for j, e in enumerate(ref) if j not in used_r]
    return pairs, rest_c, rest_r


def align(cand_tokens: Sequence[str], ref_tokens: Sequence[str]) -> list[tuple[int, int]]:
    """Exact stage then stem stage; returns (candidate_pos, reference_pos) sorted by candidate."""
    cand = list(enumerate(cand_tokens))
    ref = list(enumerate(ref_tokens))
    exact, cand, ref = _match_stage(cand, ref, lambda w: w)
    stemmed, _, _ = _match_stage(cand, ref, porter_stem)
    return sorted(exact + stemmed)


def count_chunks(pairs: list[tuple[int, int]]) -> int:
    """Runs of matches adjacent in both candidate and reference."""
    if not pairs:
        return 0
    chunks = 1
    for (c0, r0), (c1, r1) in zip(pairs, pairs[1:]):
        if not (c1 == c0 + 1 and r1 == r0 + 1):
            chunks += 1
    return chunks


def meteor_tokens(cand: Sequence[str], ref: Sequence[str],
                  alpha: float = ALPHA, beta: float = BETA, gamma: float = GAMMA) -> float:
    pairs = align(cand, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    p = m / len(cand)
    r = m / len(ref)
    fmean = p * r / (alpha * p + (1 - alpha) * r)
    penalty = gamma * (count_chunks(pairs) / m) ** beta
    return fmean * (1 - penalty)


def meteor(candidate: str, reference: str) -> float:
    return meteor_tokens(tokenize(candidate), tokenize(reference))
