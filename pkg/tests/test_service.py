"""Annotation service: state machine, persistence, and error statuses."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from tracecap.service import make_app


def trace_payload(t0: float = 0.0, t1: float = 2.0, n: int = 9) -> list:
    step = (t1 - t0) / (n - 1)
    return [[{"x": round(0.1 * k, 3), "y": 0.2, "t": round(t0 + step * k, 3)} for k in range(n)]]


def auto_payload(text: str, step: float = 0.4) -> list:
    return [
        {"utterance": w, "start_time": round(k * step, 3), "end_time": round(k * step + step, 3)}
        for k, w in enumerate(text.split())
    ]


@pytest.fixture
def store(tmp_path):
    return tmp_path / "corpus.jsonl"


@pytest.fixture
def client(store):
    return TestClient(make_app(store))


def run_session(client: TestClient, image_ref: str, caption: str, spoken: str | None = None) -> dict:
    session = client.post("/api/sessions", json={"image_ref": image_ref, "annotator_id": "ann0"}).json()
    sid = session["session_id"]
    capture = client.post(
        f"/api/sessions/{sid}/capture",
        json={"trace": trace_payload(), "auto_transcript": auto_payload(spoken or caption)},
    )
    assert capture.status_code == 200
    transcript = client.post(f"/api/sessions/{sid}/transcript", json={"caption": caption})
    assert transcript.status_code == 200
    final = client.post(f"/api/sessions/{sid}/finalize")
    assert final.status_code == 200
    return final.json()


class TestStateMachine:
    def test_full_walk(self, client):
        created = client.post("/api/sessions", json={"image_ref": "img1"})
        assert created.status_code == 200
        assert created.json()["state"] == "created"
        sid = created.json()["session_id"]

        captured = client.post(
            f"/api/sessions/{sid}/capture",
            json={"trace": trace_payload(), "auto_transcript": auto_payload("a man riding")},
        )
        assert captured.json()["state"] == "captured"

        transcribed = client.post(f"/api/sessions/{sid}/transcript", json={"caption": "a man riding"})
        assert transcribed.json()["state"] == "transcribed"

        final = client.post(f"/api/sessions/{sid}/finalize").json()
        assert final["state"] == "finalized"
        narrative = final["narrative"]
        assert narrative["image_id"] == "img1"
        assert [w["utterance"] for w in narrative["timed_caption"]] == ["a", "man", "riding"]
        for word in narrative["timed_caption"]:
            assert word["start_time"] <= word["end_time"]
        assert final["qc"]["pass"] is True

        listed = client.get("/api/narratives").json()["narratives"]
        assert len(listed) == 1
        assert listed[0]["image_id"] == "img1"

    def test_steps_must_run_in_order(self, client):
        sid = client.post("/api/sessions", json={"image_ref": "img"}).json()["session_id"]
        assert client.post(f"/api/sessions/{sid}/transcript", json={"caption": "hi"}).status_code == 409
        assert client.post(f"/api/sessions/{sid}/finalize").status_code == 409

        body = {"trace": trace_payload(), "auto_transcript": auto_payload("hi")}
        assert client.post(f"/api/sessions/{sid}/capture", json=body).status_code == 200
        assert client.post(f"/api/sessions/{sid}/capture", json=body).status_code == 409

    def test_double_finalize_conflicts(self, client):
        final = run_session(client, "img1", "a man riding")
        sid = final["session_id"]
        again = client.post(f"/api/sessions/{sid}/finalize")
        assert again.status_code == 409
        assert "finalized" in again.json()["detail"]
        assert len(client.get("/api/narratives").json()["narratives"]) == 1

    def test_unknown_session_is_404(self, client):
        assert client.post("/api/sessions/nope/finalize").status_code == 404
        assert (
            client.post(
                "/api/sessions/nope/capture",
                json={"trace": trace_payload(), "auto_transcript": auto_payload("hi")},
            ).status_code
            == 404
        )


class TestValidation:
    def test_create_requires_image_ref(self, client):
        assert client.post("/api/sessions", json={}).status_code == 400
        assert client.post("/api/sessions", json={"image_ref": ""}).status_code == 400
        assert client.post("/api/sessions", json={"image_ref": 7}).status_code == 400
        assert client.post("/api/sessions", json={"image_ref": "x", "annotator_id": ""}).status_code == 400

    def test_capture_rejects_bad_traces(self, client):
        sid = client.post("/api/sessions", json={"image_ref": "img"}).json()["session_id"]
        url = f"/api/sessions/{sid}/capture"
        auto = auto_payload("hi")
        assert client.post(url, json={"trace": "nope", "auto_transcript": auto}).status_code == 422
        assert client.post(url, json={"trace": [], "auto_transcript": auto}).status_code == 422
        assert client.post(url, json={"trace": [[{"x": 0.1}]], "auto_transcript": auto}).status_code == 422
        backwards = [[{"x": 0.1, "y": 0.1, "t": 1.0}, {"x": 0.2, "y": 0.2, "t": 0.5}]]
        assert client.post(url, json={"trace": backwards, "auto_transcript": auto}).status_code == 422

    def test_capture_rejects_bad_transcripts(self, client):
        sid = client.post("/api/sessions", json={"image_ref": "img"}).json()["session_id"]
        url = f"/api/sessions/{sid}/capture"
        trace = trace_payload()
        assert client.post(url, json={"trace": trace, "auto_transcript": {"a": 1}}).status_code == 422
        bad_word = [{"utterance": "hi", "start_time": 1.0, "end_time": 0.5}]
        assert client.post(url, json={"trace": trace, "auto_transcript": bad_word}).status_code == 422
        # A failed capture leaves the session usable.
        assert client.post(url, json={"trace": trace, "auto_transcript": auto_payload("hi")}).status_code == 200

    def test_transcript_rejects_non_string_captions(self, client):
        sid = client.post("/api/sessions", json={"image_ref": "img"}).json()["session_id"]
        client.post(
            f"/api/sessions/{sid}/capture",
            json={"trace": trace_payload(), "auto_transcript": auto_payload("hi")},
        )
        url = f"/api/sessions/{sid}/transcript"
        assert client.post(url, json={"caption": 7}).status_code == 422
        assert client.post(url, json={"caption": None}).status_code == 422
        assert client.post(url, json={"caption": "hi"}).status_code == 200

    def test_empty_caption_flows_into_a_failing_verdict(self, client):
        # An empty caption is a QC problem, not a malformed request: the
        # narrative comes back finalized with a reasoned failing verdict.
        final = run_session(client, "img1", "", spoken="hi there")
        assert final["qc"]["pass"] is False
        assert "empty" in final["qc"]["reason"]
        assert final["narrative"]["timed_caption"] == []

    def test_finalize_threshold_must_be_numeric(self, client):
        sid = client.post("/api/sessions", json={"image_ref": "img"}).json()["session_id"]
        client.post(
            f"/api/sessions/{sid}/capture",
            json={"trace": trace_payload(), "auto_transcript": auto_payload("hi")},
        )
        client.post(f"/api/sessions/{sid}/transcript", json={"caption": "hi"})
        assert client.post(f"/api/sessions/{sid}/finalize", json={"threshold": "abc"}).status_code == 422
        assert client.post(f"/api/sessions/{sid}/finalize", json={"threshold": 0.5}).status_code == 200


class TestQcAndFilters:
    def test_mismatched_speech_fails_gate(self, client):
        final = run_session(client, "img1", "a man riding a bike", spoken="zzz qqq vvv")
        assert final["qc"]["pass"] is False

        passing = run_session(client, "img2", "a man riding a bike")
        assert passing["qc"]["pass"] is True

        both = client.get("/api/narratives").json()["narratives"]
        assert len(both) == 2
        passed = client.get("/api/narratives", params={"qc_pass": "true"}).json()["narratives"]
        assert [n["image_id"] for n in passed] == ["img2"]
        failed = client.get("/api/narratives", params={"qc_pass": "false"}).json()["narratives"]
        assert [n["image_id"] for n in failed] == ["img1"]

    def test_image_id_filter(self, client):
        run_session(client, "img1", "a dog")
        run_session(client, "img2", "a cat")
        only = client.get("/api/narratives", params={"image_id": "img2"}).json()["narratives"]
        assert [n["image_id"] for n in only] == ["img2"]
        none = client.get("/api/narratives", params={"image_id": "img9"}).json()["narratives"]
        assert none == []

    def test_custom_threshold_changes_verdict(self, client):
        strictly = run_session(client, "img1", "a man riding", spoken="a man ridin")
        assert strictly["qc"]["pass"] is True
        sid = client.post("/api/sessions", json={"image_ref": "img2"}).json()["session_id"]
        client.post(
            f"/api/sessions/{sid}/capture",
            json={"trace": trace_payload(), "auto_transcript": auto_payload("a man ridin")},
        )
        client.post(f"/api/sessions/{sid}/transcript", json={"caption": "a man riding"})
        final = client.post(f"/api/sessions/{sid}/finalize", json={"threshold": 0.0}).json()
        assert final["qc"]["pass"] is False


class TestPersistence:
    def test_store_file_is_append_only_jsonl(self, client, store):
        run_session(client, "img1", "a dog")
        run_session(client, "img2", "a cat")
        lines = store.read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["image_id"] == "img1"

    def test_restart_recovers_narratives(self, store):
        with TestClient(make_app(store)) as first:
            run_session(first, "img1", "a dog on grass")
        with open(store, "ab") as f:
            f.write(b"this line is garbage\n")

        with TestClient(make_app(store)) as reborn:
            listed = reborn.get("/api/narratives").json()["narratives"]
            assert [n["image_id"] for n in listed] == ["img1"]
            assert [w["utterance"] for w in listed[0]["timed_caption"]] == ["a", "dog", "on", "grass"]
            # The recovered service keeps appending to the same file.
            run_session(reborn, "img2", "a cat")
            assert len(reborn.get("/api/narratives").json()["narratives"]) == 2

    def test_memory_only_service_works_without_store(self):
        client = TestClient(make_app(None))
        run_session(client, "img1", "a dog")
        assert len(client.get("/api/narratives").json()["narratives"]) == 1


class TestConcurrency:
    def test_eight_parallel_sessions_stay_isolated(self, client, store):
        def worker(k: int) -> dict:
            return run_session(client, f"img{k}", f"caption number {k} a dog")

        with ThreadPoolExecutor(max_workers=8) as pool:
            finals = list(pool.map(worker, range(8)))

        assert all(f["state"] == "finalized" for f in finals)
        listed = client.get("/api/narratives").json()["narratives"]
        assert sorted(n["image_id"] for n in listed) == sorted(f"img{k}" for k in range(8))
        by_image = {n["image_id"]: n["caption"] for n in listed}
        for k in range(8):
            assert by_image[f"img{k}"] == f"caption number {k} a dog"
        assert len(store.read_text().splitlines()) == 8


class TestStaticUi:
    def test_ui_directory_served_at_root(self, tmp_path, store):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<!doctype html><title>annotator</title>")
        client = TestClient(make_app(store, ui_dir=ui))
        page = client.get("/")
        assert page.status_code == 200
        assert "annotator" in page.text
        # The API stays mounted alongside the UI.
        assert client.post("/api/sessions", json={"image_ref": "img"}).status_code == 200

    def test_no_ui_directory_means_no_root(self, client):
        assert client.get("/").status_code == 404
