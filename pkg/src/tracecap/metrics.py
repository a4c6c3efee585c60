"""Single-reference caption metrics: ROUGE-L, ROUGE-1-F1, BLEU-1, BLEU-4.

All operate on token sequences (share tokenize() for comparable scores)
and return values in [0, 1]. Empty candidate or reference scores 0. BLEU
uses clipped n-gram precisions, a geometric mean, and the brevity
penalty exp(1 - |r|/|c|) for short candidates; no smoothing, so a zero
precision at any order zeroes the score.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from .model import TracecapError

Tokens = Sequence[str]


def _f1(overlap: float, c_len: int, r_len: int) -> float:
    if c_len == 0 or r_len == 0:
        return 0.0
    precision = overlap / c_len
    recall = overlap / r_len
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _lcs_length(candidate: Tokens, reference: Tokens) -> int:
    # Two-row DP; O(|c|*|r|) time, O(|r|) space.
    prev = [0] * (len(reference) + 1)
    for c_tok in candidate:
        cur = [0]
        for j, r_tok in enumerate(reference, start=1):
            if c_tok == r_tok:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Tokens, reference: Tokens) -> float:
    """F1 over the longest common subsequence of the two sequences."""
    return _f1(_lcs_length(candidate, reference), len(candidate), len(reference))


def rouge_1_f1(candidate: Tokens, reference: Tokens) -> float:
    """F1 over the clipped unigram overlap; the orderless ROUGE-L."""
    overlap = sum((Counter(candidate) & Counter(reference)).values())
    return _f1(overlap, len(candidate), len(reference))


def _ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Tokens, reference: Tokens, max_n: int = 4) -> float:
    """BLEU against a single reference with orders 1..max_n."""
    if max_n < 1:
        raise TracecapError(f"max_n must be >= 1, got {max_n}")
    if not candidate or not reference:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_grams = _ngrams(candidate, n)
        total = sum(cand_grams.values())
        if total == 0:
            return 0.0
        clipped = sum((cand_grams & _ngrams(reference, n)).values())
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    brevity = 1.0
    if len(candidate) < len(reference):
        brevity = math.exp(1.0 - len(reference) / len(candidate))
    return brevity * math.exp(log_sum / max_n)


def bleu_1(candidate: Tokens, reference: Tokens) -> float:
    return bleu(candidate, reference, max_n=1)


def bleu_4(candidate: Tokens, reference: Tokens) -> float:
    return bleu(candidate, reference, max_n=4)
