"""End-to-end command-line runs against temporary files."""

from __future__ import annotations

import dataclasses
import json
import shutil
import subprocess

import pytest

from tracecap import serialize_narrative, tokenize
from tracecap.cli import run
from tracecap.labelmap import MaskLibrary, mask_library_to_lines
from tracecap.sync import build_narrative

import numpy as np

from conftest import make_auto, make_manual, straight_trace

AUTO_ENTRIES = [
    {"utterance": "a", "start_time": 0.0, "end_time": 0.2},
    {"utterance": "uh", "start_time": 0.2, "end_time": 0.4},
    {"utterance": "man", "start_time": 0.4, "end_time": 0.8},
    {"utterance": "ridin", "start_time": 0.9, "end_time": 1.3},
    {"utterance": "bike", "start_time": 1.5, "end_time": 2.0},
]
MANUAL_TEXT = "a man riding his bike"
TRACE_STROKES = [[{"x": 0.1 * k, "y": 0.2, "t": 0.25 * k} for k in range(9)]]


@pytest.fixture
def pair(tmp_path):
    auto = tmp_path / "auto.json"
    manual = tmp_path / "manual.txt"
    trace = tmp_path / "trace.json"
    auto.write_text(json.dumps(AUTO_ENTRIES))
    manual.write_text(MANUAL_TEXT + "\n")
    trace.write_text(json.dumps(TRACE_STROKES))
    return {"auto": str(auto), "manual": str(manual), "trace": str(trace)}


def corpus_narrative(image_id: str, caption: str, good: bool = True):
    tokens = tokenize(caption)
    if good:
        entries = [(w, round(0.2 * k, 6), round(0.2 * k + 0.2, 6)) for k, w in enumerate(tokens)]
    else:
        entries = [("zzzz", 0.0, 0.5), ("qqqq", 0.5, 1.0)]
    return build_narrative(
        make_auto(entries),
        make_manual(caption),
        straight_trace(0.0, round(0.2 * len(tokens), 6), points=8),
        dataset_id="t",
        image_id=image_id,
        annotator_id="a",
    )


def write_corpus(path, narratives) -> str:
    with open(path, "wb") as f:
        for n in narratives:
            f.write(serialize_narrative(n))
    return str(path)


def write_boxes(path, rows) -> str:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    return str(path)


class TestAlign:
    def test_tsv_and_total_cost(self, pair, capsys):
        assert run(["align", "--auto", pair["auto"], "--manual", pair["manual"]]) == 0
        captured = capsys.readouterr()
        lines = captured.out.strip().split("\n")
        assert lines[0] == "a_index\ta_word\tm_index\tm_word\tcost"
        assert lines[2] == "1\tuh\t0\ta\t2"
        assert lines[4] == "3\tridin\t2\triding\t1"
        assert lines[5] == "4\tbike\t4\tbike\t0"
        assert "total_cost=3" in captured.err

    def test_out_file(self, pair, tmp_path, capsys):
        out = tmp_path / "align.tsv"
        assert run(["align", "--auto", pair["auto"], "--manual", pair["manual"], "--out", str(out)]) == 0
        assert capsys.readouterr().out == ""
        assert out.read_text().startswith("a_index\t")


class TestBuild:
    def test_single_narrative_line(self, pair, capsys):
        code = run(
            ["build", "--auto", pair["auto"], "--manual", pair["manual"], "--trace", pair["trace"], "--image-id", "xyz"]
        )
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["image_id"] == "xyz"
        assert [w["utterance"] for w in record["timed_caption"]] == tokenize(MANUAL_TEXT)
        assert record["qc"]["pass"] is True

    def test_invalid_auto_json(self, pair, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        code = run(["build", "--auto", str(bad), "--manual", pair["manual"], "--trace", pair["trace"]])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestQc:
    def test_pair_verdict(self, pair, capsys):
        assert run(["qc", "--auto", pair["auto"], "--manual", pair["manual"]]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["raw_distance"] == 3
        assert record["pass"] is True

    def test_pair_fails_under_tight_threshold(self, pair, capsys):
        assert run(["qc", "--auto", pair["auto"], "--manual", pair["manual"], "--threshold", "0.05"]) == 0
        assert json.loads(capsys.readouterr().out)["pass"] is False

    def test_corpus_filter(self, tmp_path, capsys):
        good = corpus_narrative("img0", "a dog on grass")
        bad = corpus_narrative("img1", "a dog on grass", good=False)
        ungated = dataclasses.replace(good, image_id="img2", qc=None)
        corpus = write_corpus(tmp_path / "corpus.jsonl", [good, bad, ungated])
        out = tmp_path / "kept.jsonl"
        assert run(["qc", "--corpus", corpus, "--drop-failed", "--out", str(out)]) == 0
        captured = capsys.readouterr()
        assert "kept=1 of 3" in captured.err
        kept = [json.loads(line) for line in out.read_text().splitlines()]
        assert [r["image_id"] for r in kept] == ["img0"]

    def test_requires_corpus_or_pair(self, capsys):
        assert run(["qc"]) == 1
        assert "error:" in capsys.readouterr().err


class TestFeatures:
    def test_sidecar_records(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path / "c.jsonl", [corpus_narrative("img0", "a dog")])
        assert run(["features", "--corpus", corpus]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["image_id"] == "img0"
        assert all(len(vec) == 5 for vec in record["vectors"])
        assert "position_encodings" not in record

    def test_sinusoid_dimension(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path / "c.jsonl", [corpus_narrative("img0", "a dog")])
        assert run(["features", "--corpus", corpus, "--sinusoid-dim", "8"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert len(record["position_encodings"]) == len(record["vectors"])
        assert all(len(enc) == 8 for enc in record["position_encodings"])

    def test_jobs_preserve_order_and_bytes(self, tmp_path):
        narratives = [corpus_narrative(f"img{i}", "a dog on grass near a tree") for i in range(6)]
        corpus = write_corpus(tmp_path / "c.jsonl", narratives)
        one, four = tmp_path / "one.jsonl", tmp_path / "four.jsonl"
        assert run(["features", "--corpus", corpus, "--out", str(one)]) == 0
        assert run(["features", "--corpus", corpus, "--jobs", "4", "--out", str(four)]) == 0
        assert one.read_bytes() == four.read_bytes()


class TestEval:
    def test_identical_captions_score_one(self, tmp_path, capsys):
        narratives = [corpus_narrative(f"img{i}", "a dog on grass") for i in range(3)]
        pred = write_corpus(tmp_path / "pred.jsonl", narratives)
        ref = write_corpus(tmp_path / "ref.jsonl", narratives)
        assert run(["eval", "--pred", pred, "--ref", ref]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "image_id\trouge_l\trouge_1_f1\tbleu1\tbleu4"
        assert lines[-1] == "mean\t1.000000\t1.000000\t1.000000\t1.000000"

    def test_json_and_figure_outputs(self, tmp_path, capsys):
        pred = write_corpus(tmp_path / "p.jsonl", [corpus_narrative("img0", "a dog on grass")])
        ref = write_corpus(tmp_path / "r.jsonl", [corpus_narrative("img0", "a cat on grass")])
        json_out = tmp_path / "scores.json"
        figure = tmp_path / "scores.png"
        code = run(
            ["eval", "--pred", pred, "--ref", ref, "--json-out", str(json_out), "--figure", str(figure)]
        )
        assert code == 0
        scores = json.loads(json_out.read_text())
        assert scores["per_image"][0]["image_id"] == "img0"
        assert 0.0 < scores["mean"]["rouge_l"] < 1.0
        assert figure.stat().st_size > 0

    def test_disjoint_ids_fail(self, tmp_path, capsys):
        pred = write_corpus(tmp_path / "p.jsonl", [corpus_narrative("img0", "a dog")])
        ref = write_corpus(tmp_path / "r.jsonl", [corpus_narrative("img1", "a dog")])
        assert run(["eval", "--pred", pred, "--ref", ref]) == 2
        assert "no image_id" in capsys.readouterr().err

    def test_duplicate_ids_keep_first(self, tmp_path, capsys):
        first = corpus_narrative("img0", "a dog on grass")
        second = corpus_narrative("img0", "a cat in a tree")
        pred = write_corpus(tmp_path / "p.jsonl", [first, second])
        ref = write_corpus(tmp_path / "r.jsonl", [corpus_narrative("img0", "a dog on grass")])
        assert run(["eval", "--pred", pred, "--ref", ref]) == 0
        captured = capsys.readouterr()
        assert "duplicate image_id" in captured.err
        assert "mean\t1.000000" in captured.out


class TestStats:
    def test_key_value_report(self, tmp_path, capsys):
        corpus = write_corpus(
            tmp_path / "c.jsonl",
            [corpus_narrative("img0", "a dog"), corpus_narrative("img1", "grass near trees here")],
        )
        assert run(["stats", "--corpus", corpus]) == 0
        table = dict(line.split("\t") for line in capsys.readouterr().out.strip().split("\n"))
        assert table["captions"] == "2"
        assert table["mean_words"] == "3.000000"

    def test_nouns_table_and_figure(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path / "c.jsonl", [corpus_narrative("img0", "a dog on grass")])
        nouns_out = tmp_path / "nouns.tsv"
        figure = tmp_path / "richness.png"
        code = run(
            ["stats", "--corpus", corpus, "--nouns-out", str(nouns_out), "--figure", str(figure)]
        )
        assert code == 0
        assert nouns_out.read_text().startswith("nouns\tcaptions\n")
        assert figure.stat().st_size > 0


def hist_output(text: str) -> tuple[dict, list[list[int]]]:
    lines = text.strip().split("\n")
    meta_line = lines[2].lstrip("# ").split()
    meta = {meta_line[i]: int(meta_line[i + 1]) for i in range(0, len(meta_line), 2)}
    grid = [[int(v) for v in line.split()] for line in lines[3:]]
    return meta, grid


class TestHist:
    @pytest.fixture
    def inputs(self, tmp_path):
        corpus = write_corpus(
            tmp_path / "c.jsonl",
            [corpus_narrative("img0", "a dog on grass"), corpus_narrative("img1", "a dog sleeping")],
        )
        boxes = write_boxes(
            tmp_path / "b.jsonl",
            [
                {"image_id": "img0", "class_name": "dog", "x0": 0.0, "y0": 0.0, "x1": 1.0, "y1": 1.0},
                {"image_id": "img0", "class_name": "grass", "x0": 0.0, "y0": 0.0, "x1": 1.0, "y1": 0.5},
                {"image_id": "img1", "class_name": "dog", "x0": 0.0, "y0": 0.0, "x1": 0.5, "y1": 0.5},
            ],
        )
        return corpus, boxes

    def test_grid_mass_matches_header(self, inputs, capsys):
        corpus, boxes = inputs
        assert run(["hist", "--corpus", corpus, "--boxes", boxes]) == 0
        meta, grid = hist_output(capsys.readouterr().out)
        assert len(grid) == 50 and len(grid[0]) == 50
        assert sum(sum(row) for row in grid) + meta["out_of_range"] == meta["total"]
        assert meta["total"] > 0

    def test_sharded_record_matches_sequential(self, inputs, tmp_path, capsys):
        corpus, boxes = inputs
        rec1, rec4 = tmp_path / "h1.json", tmp_path / "h4.json"
        assert run(["hist", "--corpus", corpus, "--boxes", boxes, "--record", str(rec1), "--out", str(tmp_path / "o1")]) == 0
        assert run(["hist", "--corpus", corpus, "--boxes", boxes, "--jobs", "4", "--record", str(rec4), "--out", str(tmp_path / "o4")]) == 0
        assert rec1.read_bytes() == rec4.read_bytes()

    def test_merge_doubles_mass(self, inputs, tmp_path, capsys):
        corpus, boxes = inputs
        rec = tmp_path / "h.json"
        assert run(["hist", "--corpus", corpus, "--boxes", boxes, "--record", str(rec), "--out", str(tmp_path / "o")]) == 0
        single = json.loads(rec.read_text())
        assert run(["hist", "--merge", str(rec), str(rec), "--figure", str(tmp_path / "h.png")]) == 0
        meta, grid = hist_output(capsys.readouterr().out)
        assert meta["total"] == 2 * single["total"]
        assert (tmp_path / "h.png").stat().st_size > 0

    def test_requires_inputs_or_merge(self, capsys):
        assert run(["hist"]) == 1


class TestLabelmap:
    def test_pgm_and_legend_written(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path / "c.jsonl", [corpus_narrative("img0", "a dog on grass")])
        lib = MaskLibrary()
        lib.add("dog", "object", np.ones((2, 2), dtype=bool))
        lib.add("grass", "background", np.ones((1, 1), dtype=bool))
        library = tmp_path / "lib.jsonl"
        library.write_text("\n".join(mask_library_to_lines(lib)) + "\n")
        out = tmp_path / "map.pgm"
        code = run(
            ["labelmap", "--corpus", corpus, "--library", str(library), "--width", "16", "--height", "16", "--out", str(out)]
        )
        assert code == 0
        assert out.read_bytes().startswith(b"P5\n16 16\n255\n")
        legend = json.loads((tmp_path / "map.pgm.legend.json").read_text())
        assert legend["0"]["kind"] == "unlabelled"
        assert "labelled=" in capsys.readouterr().out

    def test_unknown_image_id(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path / "c.jsonl", [corpus_narrative("img0", "a dog")])
        library = tmp_path / "lib.jsonl"
        lib = MaskLibrary()
        lib.add("dog", "object", np.ones((1, 1), dtype=bool))
        library.write_text("\n".join(mask_library_to_lines(lib)) + "\n")
        code = run(
            ["labelmap", "--corpus", corpus, "--library", str(library), "--image-id", "nope", "--width", "8", "--height", "8", "--out", str(tmp_path / "m.pgm")]
        )
        assert code == 2


class TestMalformedCorpus:
    @pytest.fixture
    def corpus(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_corpus(path, [corpus_narrative("img0", "a dog")])
        with open(path, "ab") as f:
            f.write(b'{"caption": 7}\n')
        return str(path)

    def test_lenient_skips_and_reports(self, corpus, capsys):
        assert run(["stats", "--corpus", corpus]) == 0
        captured = capsys.readouterr()
        assert "skipped 1 malformed line(s)" in captured.err
        assert "captions\t1" in captured.out

    def test_strict_aborts(self, corpus, capsys):
        assert run(["stats", "--corpus", corpus, "--strict"]) == 2
        assert "error:" in capsys.readouterr().err


class TestExitCodes:
    def test_help_is_success(self, capsys):
        assert run(["--help"]) == 0

    def test_missing_subcommand(self, capsys):
        assert run([]) == 1

    def test_missing_required_argument(self, capsys):
        assert run(["align"]) == 1

    def test_unknown_subcommand(self, capsys):
        assert run(["frobnicate"]) == 1

    def test_missing_file_is_data_error(self, tmp_path, pair, capsys):
        assert run(["align", "--auto", str(tmp_path / "nope.json"), "--manual", pair["manual"]]) == 2


class TestConsoleScripts:
    def test_entry_points_installed(self):
        assert shutil.which("tracecap") is not None
        assert shutil.which("tracecap-serve") is not None

    def test_help_via_subprocess(self):
        proc = subprocess.run([shutil.which("tracecap"), "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "align" in proc.stdout
