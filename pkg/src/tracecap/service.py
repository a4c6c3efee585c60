"""HTTP service backing the live annotation loop.

Sessions walk a forward-only state machine: created -> captured ->
transcribed -> finalized. Finalize runs the full build pipeline and
appends the narrative (passing or failing, with its verdict) to an
append-only corpus file that is re-read on boot, so finalized narratives
survive restarts. Requests across sessions are independent; operations
on one session and corpus appends are serialized with locks.

Endpoints:
    POST /api/sessions                    {image_ref, annotator_id?}
    POST /api/sessions/{id}/capture       {trace, auto_transcript}
    POST /api/sessions/{id}/transcript    {caption}
    POST /api/sessions/{id}/finalize      {threshold?}
    GET  /api/narratives?image_id=&qc_pass=

Bodies and responses use the corpus record schema. A UI bundle directory
can be mounted for static serving with --ui-dir.
"""

from __future__ import annotations

import argparse
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .model import (
    AutomaticTranscript,
    ManualTranscript,
    MouseTrace,
    TimedWord,
    TracecapError,
    TracePoint,
    narrative_to_record,
    parse_narrative_jsonl,
    serialize_narrative,
)
from .sync import DEFAULT_QC_THRESHOLD, build_narrative

STATES = ("created", "captured", "transcribed", "finalized")


class ServiceError(TracecapError):
    """An error with an HTTP status class attached."""

    def __init__(self, status: int, reason: str):
        self.status = status
        self.reason = reason
        super().__init__(reason)


@dataclass
class Session:
    session_id: str
    image_ref: str
    annotator_id: str
    state: str = "created"
    trace: MouseTrace | None = None
    auto: AutomaticTranscript | None = None
    manual: ManualTranscript | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def require_state(self, expected: str) -> None:
        if self.state != expected:
            raise ServiceError(
                409, f"session {self.session_id} is {self.state}, operation requires {expected}"
            )

    def info(self) -> dict:
        return {"session_id": self.session_id, "image_ref": self.image_ref, "state": self.state}


def _trace_from_payload(payload) -> MouseTrace:
    if not isinstance(payload, list):
        raise ServiceError(422, "trace must be an array of strokes")
    strokes = []
    for s_idx, stroke in enumerate(payload):
        if not isinstance(stroke, list):
            raise ServiceError(422, f"trace stroke {s_idx} must be an array of points")
        points = []
        for p_idx, p in enumerate(stroke):
            try:
                points.append(TracePoint(x=float(p["x"]), y=float(p["y"]), t=float(p["t"])))
            except (TypeError, KeyError, ValueError) as exc:
                raise ServiceError(422, f"trace stroke {s_idx} point {p_idx}: {exc}")
            except TracecapError as exc:
                raise ServiceError(422, f"trace stroke {s_idx} point {p_idx}: {exc}")
        strokes.append(tuple(points))
    try:
        trace = MouseTrace(strokes=tuple(strokes))
    except TracecapError as exc:
        raise ServiceError(422, str(exc))
    if trace.is_empty():
        raise ServiceError(422, "trace has no points")
    return trace


def _auto_from_payload(payload) -> AutomaticTranscript:
    if not isinstance(payload, list):
        raise ServiceError(422, "auto_transcript must be an array of timed words")
    words = []
    for idx, entry in enumerate(payload):
        try:
            words.append(
                TimedWord(
                    text=entry["utterance"],
                    t0=float(entry["start_time"]),
                    t1=float(entry["end_time"]),
                )
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise ServiceError(422, f"auto_transcript word {idx}: {exc}")
        except TracecapError as exc:
            raise ServiceError(422, f"auto_transcript word {idx}: {exc}")
    try:
        return AutomaticTranscript(words=tuple(words))
    except TracecapError as exc:
        raise ServiceError(422, str(exc))


class CorpusStore:
    """Append-only corpus file plus the in-memory list it backs."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._records: list[dict] = []
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for narrative in parse_narrative_jsonl(f, strict=False):
                    self._records.append(narrative_to_record(narrative))

    def append(self, narrative) -> dict:
        line = serialize_narrative(narrative)
        record = narrative_to_record(narrative)
        with self._lock:
            if self.path is not None:
                with open(self.path, "ab") as f:
                    f.write(line)
            self._records.append(record)
        return record

    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records)


class AnnotationService:
    """The session state machine over a corpus store; HTTP-agnostic."""

    def __init__(self, store_path: str | Path | None, dataset_id: str = "live"):
        self.store = CorpusStore(store_path)
        self.dataset_id = dataset_id
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _session(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ServiceError(404, f"unknown session {session_id}")
        return session

    def create_session(self, image_ref, annotator_id="anonymous") -> dict:
        if not isinstance(image_ref, str) or not image_ref:
            raise ServiceError(400, "image_ref must be a non-empty string")
        if not isinstance(annotator_id, str) or not annotator_id:
            raise ServiceError(400, "annotator_id must be a non-empty string")
        session = Session(
            session_id=uuid.uuid4().hex, image_ref=image_ref, annotator_id=annotator_id
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session.info()

    def submit_capture(self, session_id: str, trace_payload, auto_payload) -> dict:
        trace = _trace_from_payload(trace_payload)
        auto = _auto_from_payload(auto_payload)
        session = self._session(session_id)
        with session.lock:
            session.require_state("created")
            session.trace = trace
            session.auto = auto
            session.state = "captured"
            return session.info()

    def submit_transcript(self, session_id: str, caption) -> dict:
        if not isinstance(caption, str):
            raise ServiceError(422, "caption must be a string")
        session = self._session(session_id)
        with session.lock:
            session.require_state("captured")
            try:
                session.manual = ManualTranscript.from_caption(caption)
            except TracecapError as exc:
                raise ServiceError(422, str(exc))
            session.state = "transcribed"
            return session.info()

    def finalize(self, session_id: str, threshold: float | None = None) -> dict:
        session = self._session(session_id)
        with session.lock:
            session.require_state("transcribed")
            assert session.trace is not None and session.auto is not None
            assert session.manual is not None
            try:
                narrative = build_narrative(
                    session.auto,
                    session.manual,
                    session.trace,
                    dataset_id=self.dataset_id,
                    image_id=session.image_ref,
                    annotator_id=session.annotator_id,
                    threshold=DEFAULT_QC_THRESHOLD if threshold is None else threshold,
                )
            except TracecapError as exc:
                raise ServiceError(422, str(exc))
            record = self.store.append(narrative)
            session.state = "finalized"
        return {"session_id": session_id, "state": "finalized", "narrative": record, "qc": record["qc"]}

    def list_narratives(self, image_id: str | None = None, qc_pass: bool | None = None) -> list[dict]:
        records = self.store.records()
        if image_id is not None:
            records = [r for r in records if r["image_id"] == image_id]
        if qc_pass is not None:
            records = [r for r in records if r.get("qc", {}).get("pass") is qc_pass]
        return records


def make_app(store_path: str | Path | None, ui_dir: str | Path | None = None) -> FastAPI:
    service = AnnotationService(store_path)
    app = FastAPI(title="trace-grounded caption annotation service")
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.reason})

    @app.post("/api/sessions")
    def create_session(payload: dict = Body(...)):
        return service.create_session(
            payload.get("image_ref"), payload.get("annotator_id", "anonymous")
        )

    @app.post("/api/sessions/{session_id}/capture")
    def submit_capture(session_id: str, payload: dict = Body(...)):
        return service.submit_capture(
            session_id, payload.get("trace"), payload.get("auto_transcript")
        )

    @app.post("/api/sessions/{session_id}/transcript")
    def submit_transcript(session_id: str, payload: dict = Body(...)):
        return service.submit_transcript(session_id, payload.get("caption"))

    @app.post("/api/sessions/{session_id}/finalize")
    def finalize(session_id: str, payload: dict | None = Body(default=None)):
        threshold = None if payload is None else payload.get("threshold")
        if threshold is not None:
            try:
                threshold = float(threshold)
            except (TypeError, ValueError):
                raise ServiceError(422, "threshold must be a number")
        return service.finalize(session_id, threshold)

    @app.get("/api/narratives")
    def list_narratives(image_id: str | None = None, qc_pass: bool | None = None):
        return {"narratives": service.list_narratives(image_id, qc_pass)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def main() -> int:
    parser = argparse.ArgumentParser(
        prog="tracecap-serve", description="Run the annotation service."
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--store", default="narratives.jsonl", help="append-only corpus file")
    parser.add_argument("--ui-dir", default=None, help="static UI bundle to serve at /")
    args = parser.parse_args()

    import uvicorn

    ui_dir = args.ui_dir
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    uvicorn.run(make_app(args.store, ui_dir), host=args.host, port=args.port, log_level="info")
    return 0
