"""Timestamp transfer, trace-segment extraction, and the quality gate.

Given the matching of automatic onto manual words, each manual word
receives the interval spanned by its matched automatic words; unmatched
words receive the gap between their matched neighbors, falling back to
the trace bounds T0/T1 at the edges. Trace segments are the points whose
timestamps fall inside the word's interval, bounds inclusive on both
ends so that no point is orphaned between adjacent words sharing a
boundary (a boundary point may appear in both segments).

The gate normalizes the optimal alignment cost by the character count of
the (normalized) automatic transcript, so one threshold is meaningful
across caption lengths.
"""

from __future__ import annotations

from .align import Matching, align
from .model import (
    AutomaticTranscript,
    LocalizedNarrative,
    ManualTranscript,
    MouseTrace,
    QcVerdict,
    TracecapError,
    TracePoint,
    WordGrounding,
    normalize_word,
    segment_points,
)

DEFAULT_QC_THRESHOLD = 0.30


def trace_bounds(trace: MouseTrace) -> tuple[float, float]:
    """(T0, T1): first and last timestamp over all points of the trace."""
    return trace.time_bounds()


def transfer_timestamps(
    a: AutomaticTranscript,
    m: ManualTranscript,
    mu: Matching,
    t_first: float,
    t_last: float,
) -> list[tuple[float, float]]:
    """Per-manual-word intervals (t0_bar, t1_bar) from the matched words.

    Matched word j spans min start / max end over its matched automatic
    words. Unmatched word j spans from the latest end among words matched
    earlier (T0 = t_first if none) to the earliest start among words
    matched later (T1 = t_last if none). Inverted results, possible with
    overlapping automatic intervals, are clamped to t1_bar = t0_bar.
    """
    if t_last < t_first:
        raise TracecapError(f"trace bounds inverted: [{t_first}, {t_last}]")
    if len(mu.assignment) != len(a.words):
        raise TracecapError("matching length does not equal automatic word count")
    groups = mu.groups(len(m.words))

    # prior_end[j]: max end time among automatic words matched before j;
    # later_start[j]: min start time among those matched after j.
    n_m = len(m.words)
    prior_end: list[float | None] = [None] * n_m
    best: float | None = None
    for j in range(n_m):
        prior_end[j] = best
        if groups[j]:
            end = max(a.words[i].t1 for i in groups[j])
            best = end if best is None else max(best, end)
    later_start: list[float | None] = [None] * n_m
    best = None
    for j in range(n_m - 1, -1, -1):
        later_start[j] = best
        if groups[j]:
            start = min(a.words[i].t0 for i in groups[j])
            best = start if best is None else min(best, start)

    intervals = []
    for j in range(n_m):
        if groups[j]:
            t0 = min(a.words[i].t0 for i in groups[j])
            t1 = max(a.words[i].t1 for i in groups[j])
        else:
            t0 = prior_end[j] if prior_end[j] is not None else t_first
            t1 = later_start[j] if later_start[j] is not None else t_last
        intervals.append((t0, max(t0, t1)))
    return intervals


def extract_segments(
    trace: MouseTrace, intervals: list[tuple[float, float]]
) -> list[tuple[TracePoint, ...]]:
    """Per-interval point runs, original stroke order, bounds inclusive."""
    for t0, t1 in intervals:
        if t1 < t0:
            raise TracecapError(f"segment interval inverted: [{t0}, {t1}]")
    return [segment_points(trace, t0, t1) for t0, t1 in intervals]


def _char_count(a: AutomaticTranscript) -> int:
    return sum(len(normalize_word(w.text)) for w in a.words)


def quality_gate(
    a: AutomaticTranscript, m: ManualTranscript, threshold: float = DEFAULT_QC_THRESHOLD
) -> QcVerdict:
    """Gate on alignment cost normalized by a's character count.

    Degenerate inputs never raise: an empty manual transcript, or an
    automatic transcript with no characters to corroborate against, fail
    by convention with the reason recorded.
    """
    if threshold < 0:
        raise TracecapError(f"threshold must be >= 0, got {threshold}")
    chars = _char_count(a)
    if not m.words:
        return QcVerdict(
            raw_distance=chars,
            normalized_distance=1.0 if chars else 0.0,
            threshold=threshold,
            passed=False,
            reason="empty manual transcript",
        )
    if chars == 0:
        return QcVerdict(
            raw_distance=0,
            normalized_distance=0.0,
            threshold=threshold,
            passed=False,
            reason="empty automatic transcript",
        )
    raw = align(a, m).total_cost
    normalized = raw / chars
    return QcVerdict(
        raw_distance=raw,
        normalized_distance=normalized,
        threshold=threshold,
        passed=normalized <= threshold,
    )


def build_narrative(
    a: AutomaticTranscript,
    m: ManualTranscript,
    trace: MouseTrace,
    *,
    dataset_id: str,
    image_id: str,
    annotator_id: str,
    threshold: float = DEFAULT_QC_THRESHOLD,
) -> LocalizedNarrative:
    """align -> transfer_timestamps -> extract_segments -> quality_gate.

    Always returns a narrative, failing QC included; the gate flags, it
    never drops data. Word intervals are clamped into [T0, T1] so the
    narrative invariant holds even when speech starts before the pointer
    enters the image. Raises on an empty trace.
    """
    t_first, t_last = trace_bounds(trace)
    if a.words and m.words:
        mu = align(a, m)
        intervals = transfer_timestamps(a, m, mu, t_first, t_last)
    else:
        # Nothing to transfer from: every word spans the whole trace.
        intervals = [(t_first, t_last)] * len(m.words)
    clamped = [
        (min(max(t0, t_first), t_last), min(max(t1, t_first), t_last)) for t0, t1 in intervals
    ]
    segments = extract_segments(trace, clamped)
    qc = quality_gate(a, m, threshold)
    timed_caption = tuple(
        WordGrounding(word=word, t0_bar=t0, t1_bar=t1, segment=seg)
        for word, (t0, t1), seg in zip(m.words, clamped, segments)
    )
    return LocalizedNarrative(
        dataset_id=dataset_id,
        image_id=image_id,
        annotator_id=annotator_id,
        caption=m.raw_caption,
        timed_caption=timed_caption,
        traces=trace,
        qc=qc,
    )
