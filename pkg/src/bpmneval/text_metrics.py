"""Sequence-overlap scores between candidate and reference DOT text.

All scores are sentence level and scaled to [0, 100]. Corpus figures are
macro averages of these per-pair values.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from typing import NamedTuple, Sequence

BLEU_EPSILON = 1e-9
MAX_NGRAM = 4

_TOKEN_RE = re.compile(r'->|[{};="\[\]]|(?:(?!->)[^\s{};="\[\]])+')


class EmptyReference(ValueError):
    """The reference token sequence is empty."""


class TextScores(NamedTuple):
    bleu: float
    rouge_l: float
    meteor: float


TokenSequence = Sequence[str]


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and DOT punctuation.

    ``{ } ; = " [ ]`` and ``->`` are emitted as standalone tokens:

    >>> tokenize('A -> "B"')
    ['a', '->', '"', 'b', '"']
    """
    return _TOKEN_RE.findall(text.upper().lower())


def _check_reference(reference: TokenSequence) -> None:
    if len(reference) == 0:
        raise EmptyReference("reference token sequence is empty")


def _ngrams(tokens: TokenSequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: TokenSequence, reference: TokenSequence) -> float:
    """Sentence BLEU-4 with uniform weights and epsilon-substituted zero precisions."""
    _check_reference(reference)
    c, r = len(candidate), len(reference)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, MAX_NGRAM + 1):
        cand = _ngrams(candidate, n)
        total = sum(cand.values())
        ref = _ngrams(reference, n)
        clipped = sum(min(count, ref[gram]) for gram, count in cand.items())
        precision = clipped / total if clipped else BLEU_EPSILON
        log_sum += math.log(precision)
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return 100.0 * brevity * math.exp(log_sum / MAX_NGRAM)


def lcs_length(a: TokenSequence, b: TokenSequence) -> int:
    """Length of the longest common subsequence.

    Bit-parallel over the positions of ``a`` (one big-int row per token of
    ``b``), which keeps long DOT sequences cheap in pure Python.
    """
    if not a or not b:
        return 0
    masks: dict[str, int] = {}
    for i, tok in enumerate(a):
        masks[tok] = masks.get(tok, 0) | (1 << i)
    full = (1 << len(a)) - 1
    row = full
    for tok in b:
        hits = row & masks.get(tok, 0)
        row = ((row + hits) | (row - hits)) & full
    return len(a) - row.bit_count()


def rouge_l(candidate: TokenSequence, reference: TokenSequence) -> float:
    """LCS-based F1 between candidate and reference."""
    _check_reference(reference)
    if not candidate:
        return 0.0
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 100.0 * 2 * precision * recall / (precision + recall)


def align(candidate: TokenSequence, reference: TokenSequence) -> list[tuple[int, int]]:
    """Exact-match unigram alignment as (candidate index, reference index) pairs.

    Repeatedly links the longest run of identical tokens among still
    unaligned positions, so the alignment always has the maximum number of
    matches and tends towards few chunks. Exact chunk minimization is a
    minimum common string partition problem, which is NP-hard.
    """
    positions: dict[str, list[int]] = defaultdict(list)
    for j, tok in enumerate(reference):
        positions[tok].append(j)
    cand_free = [True] * len(candidate)
    ref_free = [True] * len(reference)
    pairs: list[tuple[int, int]] = []
    while True:
        best_len, best_i, best_j = 0, -1, -1
        for i, tok in enumerate(candidate):
            if not cand_free[i]:
                continue
            # only start runs at the left edge of a free stretch of matches
            for j in positions.get(tok, ()):
                if not ref_free[j]:
                    continue
                if (
                    i > 0 and j > 0 and cand_free[i - 1] and ref_free[j - 1]
                    and candidate[i - 1] == reference[j - 1]
                ):
                    continue
                # a run can only win if it reaches one past the current best
                end_i, end_j = i + best_len, j + best_len
                if best_len and not (
                    end_i < len(candidate) and end_j < len(reference)
                    and cand_free[end_i] and ref_free[end_j]
                    and candidate[end_i] == reference[end_j]
                ):
                    continue
                length = 1
                while (
                    i + length < len(candidate) and j + length < len(reference)
                    and cand_free[i + length] and ref_free[j + length]
                    and candidate[i + length] == reference[j + length]
                ):
                    length += 1
                if length > best_len:
                    best_len, best_i, best_j = length, i, j
        if best_len == 0:
            break
        for k in range(best_len):
            cand_free[best_i + k] = False
            ref_free[best_j + k] = False
            pairs.append((best_i + k, best_j + k))
    pairs.sort()
    return pairs


def count_chunks(pairs: list[tuple[int, int]]) -> int:
    """Number of runs that are contiguous in both sequences; ``pairs`` sorted by candidate index."""
    if not pairs:
        return 0
    chunks = 1
    for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]):
        if not (i1 == i0 + 1 and j1 == j0 + 1):
            chunks += 1
    return chunks


def meteor(candidate: TokenSequence, reference: TokenSequence) -> float:
    """METEOR with exact matching only: F_mean(9:1 recall) times a fragmentation penalty."""
    _check_reference(reference)
    pairs = align(candidate, reference)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    f_mean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (count_chunks(pairs) / matches) ** 3
    return 100.0 * f_mean * (1.0 - penalty)


def score_text(candidate: str, reference: str) -> TextScores:
    cand, ref = tokenize(candidate), tokenize(reference)
    return TextScores(bleu(cand, ref), rouge_l(cand, ref), meteor(cand, ref))
