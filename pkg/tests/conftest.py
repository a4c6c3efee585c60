"""Shared builders, narrative generators, and the acceptance summary.

Tests marked @pytest.mark.acceptance(name=...) get one PASS/FAIL line
each in the terminal summary, so the acceptance run reads as a checklist.
"""

from __future__ import annotations

import random

import pytest
from hypothesis import strategies as st

from tracecap import (
    AutomaticTranscript,
    LocalizedNarrative,
    ManualTranscript,
    MouseTrace,
    QcVerdict,
    TimedWord,
    TracePoint,
    WordGrounding,
    segment_points,
)

# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def make_auto(entries: list[tuple[str, float, float]]) -> AutomaticTranscript:
    return AutomaticTranscript(words=tuple(TimedWord(w, t0, t1) for w, t0, t1 in entries))


def make_manual(caption: str) -> ManualTranscript:
    return ManualTranscript.from_caption(caption)


def make_trace(*strokes: list[tuple[float, float, float]]) -> MouseTrace:
    return MouseTrace(
        strokes=tuple(tuple(TracePoint(x, y, t) for x, y, t in stroke) for stroke in strokes)
    )


def straight_trace(t0: float, t1: float, points: int = 10) -> MouseTrace:
    """A single diagonal stroke with evenly spaced timestamps."""
    step = (t1 - t0) / max(points - 1, 1)
    return make_trace([(0.1 + 0.8 * k / max(points - 1, 1), 0.2, round(t0 + k * step, 6)) for k in range(points)])


# ---------------------------------------------------------------------------
# Random narrative generation (shared by round-trip tests and acceptance)
# ---------------------------------------------------------------------------

_WORD_POOL = (
    "a the man woman dog cat bike tree sky grass road holding riding standing"
    " red small left front of on in near behind it this".split()
)


def make_narrative(rng: random.Random, idx: int) -> LocalizedNarrative:
    """A structurally valid narrative with 6-decimal-stable numbers.

    All timestamps sit on a millisecond grid and coordinates on a 1e-3
    grid, so serialization at 6 decimals reproduces them exactly.
    """
    strokes = []
    t_ms = rng.randint(0, 2000)
    for _ in range(rng.randint(1, 3)):
        stroke = []
        for _ in range(rng.randint(1, 8)):
            t_ms += rng.randint(1, 400)
            stroke.append(
                TracePoint(
                    x=rng.randint(-20, 1020) / 1000,
                    y=rng.randint(-20, 1020) / 1000,
                    t=t_ms / 1000,
                )
            )
        strokes.append(tuple(stroke))
    trace = MouseTrace(strokes=tuple(strokes))
    t_first, t_last = trace.time_bounds()
    first_ms, last_ms = round(t_first * 1000), round(t_last * 1000)

    words = [rng.choice(_WORD_POOL) for _ in range(rng.randint(1, 10))]
    caption = " ".join(words)
    groundings = []
    for word in words:
        lo = rng.randint(first_ms, last_ms)
        hi = rng.randint(lo, last_ms)
        t0, t1 = lo / 1000, hi / 1000
        groundings.append(
            WordGrounding(word=word, t0_bar=t0, t1_bar=t1, segment=segment_points(trace, t0, t1))
        )

    qc = None
    if rng.random() < 0.7:
        raw = rng.randint(0, 30)
        normalized = round(raw / 41, 6)
        qc = QcVerdict(
            raw_distance=raw,
            normalized_distance=normalized,
            threshold=0.3,
            passed=normalized <= 0.3,
        )
    return LocalizedNarrative(
        dataset_id="synthetic",
        image_id=f"img{idx:05d}",
        annotator_id=f"ann{rng.randint(0, 9)}",
        caption=caption,
        timed_caption=tuple(groundings),
        traces=trace,
        qc=qc,
    )


@st.composite
def narratives(draw) -> LocalizedNarrative:
    """Hypothesis strategy over the same grid-aligned narrative shape."""
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return make_narrative(random.Random(seed), idx=draw(st.integers(0, 99999)))


# ---------------------------------------------------------------------------
# Acceptance checklist rendering
# ---------------------------------------------------------------------------

_RESULTS: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.kwargs.get("name", item.name)
    if report.when == "call":
        _RESULTS.append((name, "PASS" if report.passed else "FAIL"))
    elif report.when == "setup" and (report.failed or report.skipped):
        _RESULTS.append((name, "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _RESULTS:
        terminalreporter.write_line(f"{verdict}  {name}")
