"""Corpus analyses: localization histograms and richness statistics.

The localization histogram measures how well trace segments land on the
object they mention: each segment is paired with the closest same-class
box (centroid to box center), every point is mapped into the box's frame
(the box spans [-1,1] x [-1,1]), and positions are accumulated on a
fixed grid over [-3,3] x [-3,3] by default. Histograms are mergeable, so
corpus shards accumulate independently.

Richness statistics are per-caption means of word counts by class. The
word-class tagger is pluggable: any callable token -> class name from
TAG_CLASSES. The built-in default covers closed classes by lexicon and
open classes by suffix heuristics, good enough for fixtures and smoke
analysis; plug a real tagger for linguistic work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .model import BoundingBox, LocalizedNarrative, TracecapError, TracePoint, tokenize

Tagger = Callable[[str], str]

TAG_CLASSES = ("noun", "pronoun", "adjective", "adposition", "verb", "other")

DEFAULT_RANGE = (-3.0, 3.0)
DEFAULT_BINS = 50


# ---------------------------------------------------------------------------
# 2-D histogram
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Histogram2D:
    """Fixed-range 2-D count grid with out-of-range and skip tracking.

    bins[iy, ix] counts points whose (u, v) fell in cell (ix, iy); the
    grid covers x_range by y_range, upper edges inclusive in the last
    cell. total counts every point presented, in range or not.
    """

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    bins: np.ndarray
    total: int = 0
    out_of_range: int = 0
    skipped_mentions: int = 0

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.int64)
        if self.bins.ndim != 2:
            raise TracecapError("histogram bins must be a 2-D grid")
        if self.x_range[1] <= self.x_range[0] or self.y_range[1] <= self.y_range[0]:
            raise TracecapError("histogram ranges must be non-degenerate")

    @classmethod
    def empty(
        cls,
        x_range: tuple[float, float] = DEFAULT_RANGE,
        y_range: tuple[float, float] = DEFAULT_RANGE,
        bins: int = DEFAULT_BINS,
    ) -> "Histogram2D":
        return cls(x_range=x_range, y_range=y_range, bins=np.zeros((bins, bins), dtype=np.int64))

    def accumulate(self, u: float, v: float) -> None:
        self.total += 1
        ix = _bin_index(u, self.x_range, self.bins.shape[1])
        iy = _bin_index(v, self.y_range, self.bins.shape[0])
        if ix is None or iy is None:
            self.out_of_range += 1
            return
        self.bins[iy, ix] += 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram2D):
            return NotImplemented
        return (
            self.x_range == other.x_range
            and self.y_range == other.y_range
            and np.array_equal(self.bins, other.bins)
            and self.total == other.total
            and self.out_of_range == other.out_of_range
            and self.skipped_mentions == other.skipped_mentions
        )

    def to_record(self) -> dict:
        return {
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "bins": self.bins.tolist(),
            "total": self.total,
            "out_of_range": self.out_of_range,
            "skipped_mentions": self.skipped_mentions,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Histogram2D":
        return cls(
            x_range=tuple(record["x_range"]),
            y_range=tuple(record["y_range"]),
            bins=np.asarray(record["bins"], dtype=np.int64),
            total=int(record["total"]),
            out_of_range=int(record["out_of_range"]),
            skipped_mentions=int(record.get("skipped_mentions", 0)),
        )


def _bin_index(value: float, rng: tuple[float, float], count: int) -> int | None:
    lo, hi = rng
    if not (lo <= value <= hi) or math.isnan(value):
        return None
    if value == hi:
        # Upper edge belongs to the last cell.
        return count - 1
    return int((value - lo) / (hi - lo) * count)


def merge_histograms(h1: Histogram2D, h2: Histogram2D) -> Histogram2D:
    """Elementwise sum; associative and commutative; shapes must match."""
    if (
        h1.x_range != h2.x_range
        or h1.y_range != h2.y_range
        or h1.bins.shape != h2.bins.shape
    ):
        raise TracecapError("cannot merge histograms with different ranges or bin counts")
    return Histogram2D(
        x_range=h1.x_range,
        y_range=h1.y_range,
        bins=h1.bins + h2.bins,
        total=h1.total + h2.total,
        out_of_range=h1.out_of_range + h2.out_of_range,
        skipped_mentions=h1.skipped_mentions + h2.skipped_mentions,
    )


# ---------------------------------------------------------------------------
# Class mentions and localization
# ---------------------------------------------------------------------------


def match_class_mentions(
    narrative: LocalizedNarrative, class_names: Iterable[str]
) -> list[tuple[str, tuple[TracePoint, ...]]]:
    """Find class-name mentions in the caption and pool their segments.

    Matching is exact on token sequences, case-insensitive, multi-word
    class names allowed; overlaps resolve longest-match-first scanning
    left to right ("traffic light" beats "light"). Each mention carries
    the union of its matched words' trace segments, original order,
    shared boundary points deduplicated.
    """
    by_tokens: dict[tuple[str, ...], str] = {}
    for name in class_names:
        tokens = tuple(tokenize(name))
        if tokens:
            by_tokens[tokens] = name
    if not by_tokens:
        return []
    max_len = max(len(t) for t in by_tokens)

    words = [g.word for g in narrative.timed_caption]
    mentions = []
    i = 0
    while i < len(words):
        hit = None
        for length in range(min(max_len, len(words) - i), 0, -1):
            key = tuple(words[i : i + length])
            if key in by_tokens:
                hit = (by_tokens[key], length)
                break
        if hit is None:
            i += 1
            continue
        name, length = hit
        seen = set()
        pooled = []
        for g in narrative.timed_caption[i : i + length]:
            for p in g.segment:
                if p not in seen:
                    seen.add(p)
                    pooled.append(p)
        mentions.append((name, tuple(pooled)))
        i += length
    return mentions


def box_relative_coords(x: float, y: float, box: BoundingBox) -> tuple[float, float]:
    """Map an image point into the box frame where the box spans [-1,1]^2.

    Degenerate (zero-width or zero-height) boxes map on-edge coordinates
    to 0 and everything else to infinity, which lands out of range.
    """

    def rel(value: float, lo: float, hi: float) -> float:
        if hi == lo:
            return 0.0 if value == lo else math.inf
        return 2.0 * (value - lo) / (hi - lo) - 1.0

    return rel(x, box.x0, box.x1), rel(y, box.y0, box.y1)


def localization_histogram(
    mentions: Sequence[tuple[str, Sequence[TracePoint]]],
    boxes: Sequence[BoundingBox],
    x_range: tuple[float, float] = DEFAULT_RANGE,
    y_range: tuple[float, float] = DEFAULT_RANGE,
    bins: int = DEFAULT_BINS,
    into: Histogram2D | None = None,
) -> Histogram2D:
    """Accumulate box-relative positions of mention segments.

    Per mention: pick the same-class box whose center is closest (in
    Euclidean distance) to the segment centroid, then accumulate every
    segment point's box-relative position. Mentions with no same-class
    box or an empty segment are skipped and counted. `into` lets shards
    reuse one accumulator; otherwise a fresh histogram is returned.
    """
    hist = into if into is not None else Histogram2D.empty(x_range, y_range, bins)
    by_class: dict[str, list[BoundingBox]] = {}
    for box in boxes:
        if box.class_name is None:
            raise TracecapError("localization boxes must carry class names")
        by_class.setdefault(box.class_name.lower(), []).append(box)

    for class_name, segment in mentions:
        candidates = by_class.get(class_name.lower())
        if not candidates or not segment:
            hist.skipped_mentions += 1
            continue
        cx = sum(p.x for p in segment) / len(segment)
        cy = sum(p.y for p in segment) / len(segment)
        best = min(candidates, key=lambda b: math.dist((cx, cy), b.center()))
        for p in segment:
            u, v = box_relative_coords(p.x, p.y, best)
            hist.accumulate(u, v)
    return hist


# ---------------------------------------------------------------------------
# Richness statistics
# ---------------------------------------------------------------------------


_PRONOUNS = frozenset(
    """i me my mine myself we us our ours ourselves you your yours yourself yourselves
    he him his himself she her hers herself it its itself they them their theirs
    themselves this that these those who whom whose which what something someone
    somebody anything anyone anybody nothing everything everyone everybody nobody
    one ones""".split()
)

_ADPOSITIONS = frozenset(
    """in on at by for with about against between into through during before after
    above below to from up down of off over under near behind beside besides around
    across along among onto upon within without toward towards underneath beneath
    inside outside amid amidst atop alongside past beyond throughout""".split()
)

_AUX_VERBS = frozenset(
    """is are was were am be been being has have had do does did can could will
    would shall should may might must""".split()
)

_COMMON_ADJECTIVES = frozenset(
    """red green blue white black brown yellow orange pink purple grey gray golden
    big small large little tiny huge old young new tall short long high low wide
    narrow few many several left right front back open closed dark bright light
    wooden metallic plastic round square flat empty full""".split()
)

_OTHER_WORDS = frozenset(
    """a an the and or but nor so yet if then than as not no also very too there
    here when where how why all both each some any most more less out again just
    only now once""".split()
)

_ADJECTIVE_SUFFIXES = ("ful", "ous", "ish", "ive", "able", "ible", "less", "ic", "al")


def default_tagger(token: str) -> str:
    """Lexicon plus suffix heuristic word-class tagger.

    Closed classes (pronouns, adpositions, auxiliaries, determiners) by
    lookup; -ing/-ed forms tagged verb, common adjective suffixes tagged
    adjective; alphabetic remainder defaults to noun.
    """
    t = token.lower()
    if t in _PRONOUNS:
        return "pronoun"
    if t in _ADPOSITIONS:
        return "adposition"
    if t in _AUX_VERBS:
        return "verb"
    if t in _COMMON_ADJECTIVES:
        return "adjective"
    if t in _OTHER_WORDS:
        return "other"
    if len(t) > 4 and (t.endswith("ing") or t.endswith("ed")):
        return "verb"
    if len(t) > 4 and t.endswith(_ADJECTIVE_SUFFIXES):
        return "adjective"
    if any(c.isalpha() for c in t):
        return "noun"
    return "other"


@dataclass(frozen=True)
class RichnessReport:
    """Per-caption mean counts of words and word classes over a corpus."""

    captions: int
    mean_words: float
    mean_nouns: float
    mean_pronouns: float
    mean_adjectives: float
    mean_adpositions: float
    mean_verbs: float

    def __post_init__(self):
        if self.captions <= 0:
            raise TracecapError("richness report requires at least one caption")


def _class_counts(caption: str, tagger: Tagger) -> dict[str, int]:
    counts = dict.fromkeys(TAG_CLASSES, 0)
    tokens = tokenize(caption)
    counts["words"] = len(tokens)
    for token in tokens:
        cls = tagger(token)
        if cls not in counts:
            raise TracecapError(f"tagger produced unknown class {cls!r} for {token!r}")
        counts[cls] += 1
    return counts


def richness_report(
    corpus: Iterable[LocalizedNarrative], tagger: Tagger = default_tagger
) -> RichnessReport:
    """Average per-caption word and word-class counts; errors on empty corpus."""
    sums = dict.fromkeys(("words",) + TAG_CLASSES, 0)
    captions = 0
    for narrative in corpus:
        captions += 1
        for key, value in _class_counts(narrative.caption, tagger).items():
            sums[key] += value
    if captions == 0:
        raise TracecapError("cannot report richness of an empty corpus")
    return RichnessReport(
        captions=captions,
        mean_words=sums["words"] / captions,
        mean_nouns=sums["noun"] / captions,
        mean_pronouns=sums["pronoun"] / captions,
        mean_adjectives=sums["adjective"] / captions,
        mean_adpositions=sums["adposition"] / captions,
        mean_verbs=sums["verb"] / captions,
    )


def nouns_per_caption_histogram(
    corpus: Iterable[LocalizedNarrative], tagger: Tagger = default_tagger
) -> dict[int, int]:
    """Integer-binned counts of nouns per caption: {noun count: captions}."""
    out: dict[int, int] = {}
    for narrative in corpus:
        nouns = _class_counts(narrative.caption, tagger)["noun"]
        out[nouns] = out.get(nouns, 0) + 1
    return out
