"""Core domain types and the on-disk corpus format.

Coordinates are normalized by image width/height; values slightly outside
[0, 1] are preserved on ingest (the pointer may leave the image) and are
clamped only by the operations that need clamped values. Timestamps are
seconds on a clock shared by the trace and the transcriptions. All types
are immutable values after construction and safe to share across threads.

The corpus format is UTF-8 JSON, one record per line:

    {"dataset_id": ..., "image_id": ..., "annotator_id": ..., "caption": ...,
     "timed_caption": [{"utterance", "start_time", "end_time"}, ...],
     "traces": [[{"x", "y", "t"}, ...], ...],
     "qc": {"raw_distance", "normalized_distance", "threshold", "pass"}}

`timed_caption` and `traces` are the authoritative payload; per-word trace
segments are not stored but recomputed from them on parse. Numbers are
written with 6 decimal places so that re-serialization is byte-stable.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator

FLOAT_DECIMALS = 6

# Boundary punctuation stripped by tokenize(); interior characters
# (apostrophes, hyphens) are preserved.
_STRIP_CHARS = string.punctuation + "“”‘’…«»"


class TracecapError(Exception):
    """Base class for data errors raised by this package."""


class CorpusFormatError(TracecapError):
    """A record that violates the corpus line format or a type invariant."""

    def __init__(self, reason: str, line_no: int | None = None):
        self.reason = reason
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + reason)


def _check_finite(owner: str, **fields: float) -> None:
    # NaN slips through ordinary comparisons, so every numeric field is
    # checked explicitly at construction.
    for name, value in fields.items():
        if not math.isfinite(value):
            raise TracecapError(f"{owner}.{name} must be finite, got {value!r}")


def normalize_word(word: str) -> str:
    """Lowercase a token and strip boundary punctuation; may come back empty."""
    return word.lower().strip(_STRIP_CHARS)


def tokenize(raw: str) -> list[str]:
    """Normalize a caption into tokens.

    Lowercases, splits on whitespace, strips leading/trailing punctuation
    from each token and drops tokens that end up empty. Interior
    punctuation ("don't") survives. Deterministic and idempotent on its
    own output.
    """
    tokens = []
    for piece in raw.split():
        token = normalize_word(piece)
        if token:
            tokens.append(token)
    return tokens


@dataclass(frozen=True)
class TimedWord:
    """One transcribed word and the time interval during which it was spoken."""

    text: str
    t0: float
    t1: float

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise TracecapError(f"timed word text must be non-empty and whitespace-free: {self.text!r}")
        _check_finite("timed word", t0=self.t0, t1=self.t1)
        if self.t0 < 0 or self.t1 < self.t0:
            raise TracecapError(f"timed word interval invalid: [{self.t0}, {self.t1}]")


@dataclass(frozen=True)
class AutomaticTranscript:
    """Timestamped but typically imperfect word sequence from a recognizer."""

    words: tuple[TimedWord, ...]

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        for prev, cur in zip(self.words, self.words[1:]):
            if cur.t0 < prev.t0:
                raise TracecapError(
                    f"automatic transcript start times must be non-decreasing: {prev.t0} then {cur.t0}"
                )

    def char_count(self) -> int:
        return sum(len(w.text) for w in self.words)


@dataclass(frozen=True)
class ManualTranscript:
    """Accurate caption typed by the annotator, without timestamps."""

    raw_caption: str
    words: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if list(self.words) != tokenize(self.raw_caption):
            raise TracecapError("manual transcript words must equal the tokenized caption")

    @classmethod
    def from_caption(cls, raw_caption: str) -> "ManualTranscript":
        return cls(raw_caption=raw_caption, words=tuple(tokenize(raw_caption)))


@dataclass(frozen=True)
class TracePoint:
    """A timestamped pointer position in normalized image coordinates."""

    x: float
    y: float
    t: float

    def __post_init__(self):
        _check_finite("trace point", x=self.x, y=self.y, t=self.t)
        if self.t < 0:
            raise TracecapError(f"trace point timestamp must be >= 0, got {self.t}")


@dataclass(frozen=True)
class MouseTrace:
    """Pointer points grouped into strokes; t strictly increases within a stroke."""

    strokes: tuple[tuple[TracePoint, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "strokes", tuple(tuple(s) for s in self.strokes))
        for stroke in self.strokes:
            for prev, cur in zip(stroke, stroke[1:]):
                if cur.t <= prev.t:
                    raise TracecapError(
                        f"stroke timestamps must strictly increase: {prev.t} then {cur.t}"
                    )

    def points(self) -> Iterator[TracePoint]:
        for stroke in self.strokes:
            yield from stroke

    def is_empty(self) -> bool:
        return not any(self.strokes)

    def time_bounds(self) -> tuple[float, float]:
        """(first, last) timestamp over all points; errors on an empty trace."""
        ts = [p.t for p in self.points()]
        if not ts:
            raise TracecapError("empty trace has no time bounds")
        return min(ts), max(ts)


def segment_points(traces: MouseTrace, t0: float, t1: float) -> tuple[TracePoint, ...]:
    """Points with t0 <= p.t <= t1 (inclusive both ends), in original stroke order."""
    return tuple(p for stroke in traces.strokes for p in stroke if t0 <= p.t <= t1)


@dataclass(frozen=True)
class WordGrounding:
    """A caption word, its transferred time interval, and its trace segment."""

    word: str
    t0_bar: float
    t1_bar: float
    segment: tuple[TracePoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "segment", tuple(self.segment))
        _check_finite("word grounding", t0_bar=self.t0_bar, t1_bar=self.t1_bar)
        if self.t1_bar < self.t0_bar:
            raise TracecapError(f"word interval invalid: [{self.t0_bar}, {self.t1_bar}]")
        for p in self.segment:
            if not (self.t0_bar <= p.t <= self.t1_bar):
                raise TracecapError(
                    f"segment point at t={p.t} outside word interval [{self.t0_bar}, {self.t1_bar}]"
                )


@dataclass(frozen=True)
class QcVerdict:
    """Outcome of the automatic quality gate.

    `pass` mirrors normalized_distance <= threshold except when `reason`
    is set, which marks a forced failure (nothing to corroborate: empty
    automatic or manual transcript).
    """

    raw_distance: int
    normalized_distance: float
    threshold: float
    passed: bool
    reason: str | None = None

    def __post_init__(self):
        _check_finite(
            "qc verdict",
            normalized_distance=self.normalized_distance,
            threshold=self.threshold,
        )
        if self.reason is None and self.passed != (self.normalized_distance <= self.threshold):
            raise TracecapError("qc verdict inconsistent with threshold rule")


@dataclass(frozen=True)
class LocalizedNarrative:
    """The fused record: caption, per-word intervals and trace segments, QC verdict."""

    dataset_id: str
    image_id: str
    annotator_id: str
    caption: str
    timed_caption: tuple[WordGrounding, ...]
    traces: MouseTrace
    qc: QcVerdict | None = None

    def __post_init__(self):
        object.__setattr__(self, "timed_caption", tuple(self.timed_caption))
        if [g.word for g in self.timed_caption] != tokenize(self.caption):
            raise TracecapError("timed caption words must equal the tokenized caption")
        if self.traces.is_empty():
            raise TracecapError("narrative requires a non-empty trace")
        t_first, t_last = self.traces.time_bounds()
        for g in self.timed_caption:
            if g.t0_bar < t_first or g.t1_bar > t_last:
                raise TracecapError(
                    f"word interval [{g.t0_bar}, {g.t1_bar}] outside trace bounds [{t_first}, {t_last}]"
                )


@dataclass(frozen=True)
class BoundingBox:
    """An axis-aligned box; coordinates in whatever frame the caller uses."""

    x0: float
    y0: float
    x1: float
    y1: float
    class_name: str | None = None

    def __post_init__(self):
        _check_finite("bounding box", x0=self.x0, y0=self.y0, x1=self.x1, y1=self.y1)
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise TracecapError(f"degenerate box corners: ({self.x0},{self.y0})-({self.x1},{self.y1})")

    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0


# ---------------------------------------------------------------------------
# Corpus serialization
# ---------------------------------------------------------------------------


def _round(value: Any, field: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise TracecapError(f"field '{field}' is not a number: {value!r}")
    if not math.isfinite(x):
        raise TracecapError(f"field '{field}' is not finite: {value!r}")
    return round(x, FLOAT_DECIMALS)


def narrative_to_record(n: LocalizedNarrative) -> dict:
    """Plain-dict form of a narrative, keys in canonical order, floats rounded."""
    record: dict[str, Any] = {
        "dataset_id": n.dataset_id,
        "image_id": n.image_id,
        "annotator_id": n.annotator_id,
        "caption": n.caption,
        "timed_caption": [
            {
                "utterance": g.word,
                "start_time": _round(g.t0_bar, "start_time"),
                "end_time": _round(g.t1_bar, "end_time"),
            }
            for g in n.timed_caption
        ],
        "traces": [
            [{"x": _round(p.x, "x"), "y": _round(p.y, "y"), "t": _round(p.t, "t")} for p in stroke]
            for stroke in n.traces.strokes
        ],
    }
    if n.qc is not None:
        qc: dict[str, Any] = {
            "raw_distance": int(n.qc.raw_distance),
            "normalized_distance": _round(n.qc.normalized_distance, "normalized_distance"),
            "threshold": _round(n.qc.threshold, "threshold"),
            "pass": bool(n.qc.passed),
        }
        if n.qc.reason is not None:
            qc["reason"] = n.qc.reason
        record["qc"] = qc
    return record


def serialize_narrative(n: LocalizedNarrative) -> bytes:
    """One canonical UTF-8 corpus line (newline-terminated) for a valid narrative."""
    record = narrative_to_record(n)
    return json.dumps(record, ensure_ascii=False, separators=(",", ":")).encode("utf-8") + b"\n"


def _require(record: dict, key: str, kind: type | tuple) -> Any:
    if key not in record:
        raise CorpusFormatError(f"missing field '{key}'")
    value = record[key]
    if not isinstance(value, kind):
        raise CorpusFormatError(f"field '{key}' has wrong type: {type(value).__name__}")
    return value


def narrative_from_record(record: dict) -> LocalizedNarrative:
    """Build and validate a narrative from a decoded corpus record.

    Per-word trace segments are recomputed from `traces` and the stored
    intervals (inclusive bounds), so a parsed narrative is fully populated.
    """
    if not isinstance(record, dict):
        raise CorpusFormatError("record is not an object")
    dataset_id = _require(record, "dataset_id", str)
    image_id = _require(record, "image_id", str)
    annotator_id = _require(record, "annotator_id", str)
    caption = _require(record, "caption", str)
    timed = _require(record, "timed_caption", list)
    strokes_raw = _require(record, "traces", list)

    strokes = []
    for s_idx, stroke in enumerate(strokes_raw):
        if not isinstance(stroke, list):
            raise CorpusFormatError(f"traces[{s_idx}] is not a list")
        points = []
        for p_idx, p in enumerate(stroke):
            if not isinstance(p, dict):
                raise CorpusFormatError(f"traces[{s_idx}][{p_idx}] is not an object")
            try:
                points.append(
                    TracePoint(
                        x=float(_require(p, "x", (int, float))),
                        y=float(_require(p, "y", (int, float))),
                        t=float(_require(p, "t", (int, float))),
                    )
                )
            except TracecapError as exc:
                raise CorpusFormatError(f"traces[{s_idx}][{p_idx}]: {exc}")
        strokes.append(tuple(points))
    try:
        traces = MouseTrace(strokes=tuple(strokes))
    except TracecapError as exc:
        raise CorpusFormatError(str(exc))

    groundings = []
    for w_idx, entry in enumerate(timed):
        if not isinstance(entry, dict):
            raise CorpusFormatError(f"timed_caption[{w_idx}] is not an object")
        try:
            word = _require(entry, "utterance", str)
            t0 = float(_require(entry, "start_time", (int, float)))
            t1 = float(_require(entry, "end_time", (int, float)))
            groundings.append(
                WordGrounding(word=word, t0_bar=t0, t1_bar=t1, segment=segment_points(traces, t0, t1))
            )
        except TracecapError as exc:
            raise CorpusFormatError(f"timed_caption[{w_idx}]: {exc}")

    qc = None
    if "qc" in record and record["qc"] is not None:
        q = record["qc"]
        if not isinstance(q, dict):
            raise CorpusFormatError("field 'qc' is not an object")
        try:
            qc = QcVerdict(
                raw_distance=int(_require(q, "raw_distance", (int, float))),
                normalized_distance=float(_require(q, "normalized_distance", (int, float))),
                threshold=float(_require(q, "threshold", (int, float))),
                passed=bool(_require(q, "pass", bool)),
                reason=q.get("reason"),
            )
        except TracecapError as exc:
            raise CorpusFormatError(f"qc: {exc}")

    try:
        return LocalizedNarrative(
            dataset_id=dataset_id,
            image_id=image_id,
            annotator_id=annotator_id,
            caption=caption,
            timed_caption=tuple(groundings),
            traces=traces,
            qc=qc,
        )
    except TracecapError as exc:
        raise CorpusFormatError(str(exc))


def parse_narrative_jsonl(
    stream: Iterable[str | bytes],
    strict: bool = False,
    on_error: Callable[[CorpusFormatError], None] | None = None,
) -> Iterator[LocalizedNarrative]:
    """Yield one narrative per non-blank line of a corpus stream.

    Malformed lines raise CorpusFormatError (carrying the 1-based line
    number) when strict, otherwise they are reported through `on_error`
    and skipped.
    """
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON: {exc.msg}")
            narrative = narrative_from_record(record)
        except CorpusFormatError as exc:
            err = CorpusFormatError(exc.reason, line_no)
            if strict:
                raise err
            if on_error is not None:
                on_error(err)
            continue
        yield narrative


def parse_boxes_jsonl(
    stream: Iterable[str | bytes],
    strict: bool = False,
    on_error: Callable[[CorpusFormatError], None] | None = None,
) -> Iterator[tuple[str, BoundingBox]]:
    """Yield (image_id, box) pairs from a box file.

    Each line is {image_id, class_name, x0, y0, x1, y1} with corner
    coordinates in the same normalized frame as the traces.
    """
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON: {exc.msg}")
            if not isinstance(record, dict):
                raise CorpusFormatError("record is not an object")
            image_id = _require(record, "image_id", str)
            class_name = _require(record, "class_name", str)
            try:
                box = BoundingBox(
                    x0=float(_require(record, "x0", (int, float))),
                    y0=float(_require(record, "y0", (int, float))),
                    x1=float(_require(record, "x1", (int, float))),
                    y1=float(_require(record, "y1", (int, float))),
                    class_name=class_name,
                )
            except TracecapError as exc:
                raise CorpusFormatError(str(exc))
        except CorpusFormatError as exc:
            err = CorpusFormatError(exc.reason, line_no)
            if strict:
                raise err
            if on_error is not None:
                on_error(err)
            continue
        yield image_id, box
