"""Order-preserving matching of an automatic onto a manual transcription.

The matching mu sends every automatic word a_i to exactly one manual word
m_mu(i); a manual word may receive zero or many. Among all monotone
assignments we minimize the summed character-level edit distance between
normalized tokens. Unmatched manual words cost nothing.

Recurrence: f(i, j) = d(a_i, m_j) + min_{j' <= j} f(i-1, j'), answer
min_j f(n, j). Prefix minima make each row O(|m|), the whole table
O(|a|*|m|). Pairwise word distances are computed once, vectorized over
the distinct-token vocabulary, which keeps a 1000x1000-word alignment
well under the 5 s budget.

Tie-breaking (for determinism): among equal-cost predecessors take the
largest j', and the largest argmin in the final row, keeping every match
as far right as possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AutomaticTranscript, ManualTranscript, TracecapError, normalize_word


@dataclass(frozen=True)
class Matching:
    """An assignment of automatic words onto manual words plus its cost.

    assignment[i] is the 0-based index of the manual word receiving
    automatic word i; indices are non-decreasing. per_pair_cost[i] is the
    edit distance paid by that pair.
    """

    assignment: tuple[int, ...]
    per_pair_cost: tuple[int, ...]
    total_cost: int

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(j) for j in self.assignment))
        object.__setattr__(self, "per_pair_cost", tuple(int(c) for c in self.per_pair_cost))
        if len(self.assignment) != len(self.per_pair_cost):
            raise TracecapError("assignment and per_pair_cost lengths differ")
        if any(j < 0 for j in self.assignment):
            raise TracecapError("assignment indices must be non-negative")
        if any(b < a for a, b in zip(self.assignment, self.assignment[1:])):
            raise TracecapError("assignment must be monotone non-decreasing")
        if any(c < 0 for c in self.per_pair_cost):
            raise TracecapError("per-pair costs must be non-negative")
        if self.total_cost != sum(self.per_pair_cost):
            raise TracecapError("total_cost must equal the sum of per-pair costs")

    def groups(self, m_len: int) -> tuple[tuple[int, ...], ...]:
        """A_j for each manual index j: which automatic words matched it."""
        if any(j >= m_len for j in self.assignment):
            raise TracecapError("assignment index out of range for manual length")
        buckets: list[list[int]] = [[] for _ in range(m_len)]
        for i, j in enumerate(self.assignment):
            buckets[j].append(i)
        return tuple(tuple(b) for b in buckets)


def edit_distance(u: str, v: str) -> int:
    """Unit-cost Levenshtein distance between two tokens."""
    if u == v:
        return 0
    prev = list(range(len(v) + 1))
    for i, cu in enumerate(u, start=1):
        cur = [i]
        for j, cv in enumerate(v, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (cu != cv)))
        prev = cur
    return prev[-1]


# ---------------------------------------------------------------------------
# Vectorized pairwise distances
# ---------------------------------------------------------------------------


def _char_matrix(vocab: list[str]) -> tuple[np.ndarray, np.ndarray]:
    # One row of zero-padded code points per word; zero never collides with
    # real characters because padded columns are masked by the length index.
    width = max((len(w) for w in vocab), default=0) or 1
    chars = np.zeros((len(vocab), width), dtype=np.int64)
    lens = np.zeros(len(vocab), dtype=np.int64)
    for row, word in enumerate(vocab):
        lens[row] = len(word)
        if word:
            chars[row, : len(word)] = np.frombuffer(
                word.encode("utf-32-le"), dtype=np.uint32
            ).astype(np.int64)
    return chars, lens


def _vocab_distances(a_vocab: list[str], m_vocab: list[str]) -> np.ndarray:
    """Levenshtein distance for every (a_vocab, m_vocab) pair.

    Classic character DP, run for one a-word at a time but vectorized over
    all m words jointly. The in-row insertion dependency is resolved by the
    prefix-min scan: row[k] = min_{k' <= k} (cand[k'] + k - k').
    """
    m_chars, m_lens = _char_matrix(m_vocab)
    width = m_chars.shape[1]
    offsets = np.arange(width + 1, dtype=np.int64)
    base = np.tile(offsets, (len(m_vocab), 1))
    rows = np.arange(len(m_vocab))
    out = np.empty((len(a_vocab), len(m_vocab)), dtype=np.int64)
    for ai, aw in enumerate(a_vocab):
        prev = base
        for step, ch in enumerate(aw, start=1):
            cand = np.empty_like(prev)
            cand[:, 0] = step
            cand[:, 1:] = np.minimum(prev[:, 1:] + 1, prev[:, :-1] + (m_chars != ord(ch)))
            prev = np.minimum.accumulate(cand - offsets, axis=1) + offsets
        out[ai] = prev[rows, m_lens]
    return out


def _distance_matrix(a_tokens: list[str], m_tokens: list[str]) -> np.ndarray:
    a_vocab = sorted(set(a_tokens))
    m_vocab = sorted(set(m_tokens))
    vocab_d = _vocab_distances(a_vocab, m_vocab)
    a_index = {w: k for k, w in enumerate(a_vocab)}
    m_index = {w: k for k, w in enumerate(m_vocab)}
    ai = np.fromiter((a_index[w] for w in a_tokens), dtype=np.int64, count=len(a_tokens))
    mi = np.fromiter((m_index[w] for w in m_tokens), dtype=np.int64, count=len(m_tokens))
    return vocab_d[np.ix_(ai, mi)]


# ---------------------------------------------------------------------------
# Assignment DP
# ---------------------------------------------------------------------------


def _normalized_tokens(a: AutomaticTranscript, m: ManualTranscript) -> tuple[list[str], list[str]]:
    a_tokens = [normalize_word(w.text) for w in a.words]
    m_tokens = [normalize_word(w) for w in m.words]
    if a_tokens and not m_tokens:
        raise TracecapError("cannot align a non-empty automatic transcript onto an empty manual one")
    return a_tokens, m_tokens


def align(a: AutomaticTranscript, m: ManualTranscript) -> Matching:
    """Minimum-cost monotone matching of a's words onto m's words.

    Empty automatic transcript yields the empty matching with cost 0.
    Raises when m is empty but a is not (no valid assignment exists).
    """
    a_tokens, m_tokens = _normalized_tokens(a, m)
    if not a_tokens:
        return Matching(assignment=(), per_pair_cost=(), total_cost=0)

    d = _distance_matrix(a_tokens, m_tokens)
    n, width = d.shape
    cols = np.arange(width, dtype=np.int64)
    # last_argmin[i][j] = largest j' <= j achieving min_{k <= j} f(i, k);
    # exactly the tie-break rule, so traceback is table lookups only.
    last_argmin = np.empty((n, width), dtype=np.int64)
    f = d[0].copy()
    running = np.minimum.accumulate(f)
    last_argmin[0] = np.maximum.accumulate(np.where(f == running, cols, -1))
    for i in range(1, n):
        f = d[i] + running
        running = np.minimum.accumulate(f)
        last_argmin[i] = np.maximum.accumulate(np.where(f == running, cols, -1))
    total = int(running[-1])

    assignment = [0] * n
    j = int(last_argmin[n - 1, width - 1])
    assignment[n - 1] = j
    for i in range(n - 1, 0, -1):
        j = int(last_argmin[i - 1, j])
        assignment[i - 1] = j
    per_pair = tuple(int(d[i, assignment[i]]) for i in range(n))
    return Matching(assignment=tuple(assignment), per_pair_cost=per_pair, total_cost=total)


def alignment_cost(a: AutomaticTranscript, m: ManualTranscript) -> int:
    """Total cost of the optimal matching, without materializing it."""
    a_tokens, m_tokens = _normalized_tokens(a, m)
    if not a_tokens:
        return 0
    d = _distance_matrix(a_tokens, m_tokens)
    running = np.minimum.accumulate(d[0])
    for i in range(1, d.shape[0]):
        running = np.minimum.accumulate(d[i] + running)
    return int(running[-1])
