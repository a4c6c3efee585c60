"""Command-line entry point.

Subcommands: align, build, qc, features, eval, stats, hist, labelmap.
Results go to stdout (or --out); diagnostics go to stderr. Exit codes:
0 success, 1 usage error, 2 data error. Report subcommands (eval, stats,
hist) can render a matplotlib figure next to the delimited output via
--figure.

Input file formats besides the corpus and box files: an automatic
transcript is a JSON array of {utterance, start_time, end_time}; a trace
is a JSON array of strokes, each an array of {x, y, t}; a manual caption
is plain text.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from functools import reduce

from . import analysis, features, labelmap, metrics, sync
from .align import align
from .model import (
    AutomaticTranscript,
    CorpusFormatError,
    LocalizedNarrative,
    ManualTranscript,
    MouseTrace,
    TimedWord,
    TracecapError,
    TracePoint,
    parse_boxes_jsonl,
    parse_narrative_jsonl,
    serialize_narrative,
    tokenize,
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Input readers
# ---------------------------------------------------------------------------


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise TracecapError(f"{path}: invalid JSON: {exc.msg}")


def _read_auto(path: str) -> AutomaticTranscript:
    data = _load_json(path)
    if not isinstance(data, list):
        raise TracecapError(f"{path}: automatic transcript must be a JSON array")
    words = []
    for idx, entry in enumerate(data):
        try:
            words.append(
                TimedWord(
                    text=entry["utterance"],
                    t0=float(entry["start_time"]),
                    t1=float(entry["end_time"]),
                )
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise TracecapError(f"{path}: word {idx}: malformed entry ({exc})")
    return AutomaticTranscript(words=tuple(words))


def _read_manual(path: str) -> ManualTranscript:
    with open(path, encoding="utf-8") as f:
        return ManualTranscript.from_caption(f.read().strip())


def _read_trace(path: str) -> MouseTrace:
    data = _load_json(path)
    if not isinstance(data, list):
        raise TracecapError(f"{path}: trace must be a JSON array of strokes")
    strokes = []
    for s_idx, stroke in enumerate(data):
        if not isinstance(stroke, list):
            raise TracecapError(f"{path}: stroke {s_idx} must be an array")
        points = []
        for p_idx, p in enumerate(stroke):
            try:
                points.append(TracePoint(x=float(p["x"]), y=float(p["y"]), t=float(p["t"])))
            except (TypeError, KeyError, ValueError) as exc:
                raise TracecapError(f"{path}: stroke {s_idx} point {p_idx}: {exc}")
        strokes.append(tuple(points))
    return MouseTrace(strokes=tuple(strokes))


def _load_corpus(path: str, strict: bool) -> list[LocalizedNarrative]:
    skipped = 0

    def report(err: CorpusFormatError) -> None:
        nonlocal skipped
        skipped += 1
        print(f"{path}:{err.line_no}: skipped: {err.reason}", file=sys.stderr)

    with open(path, encoding="utf-8") as f:
        narratives = list(parse_narrative_jsonl(f, strict=strict, on_error=report))
    if skipped:
        print(f"{path}: skipped {skipped} malformed line(s)", file=sys.stderr)
    return narratives


def _load_boxes(path: str, strict: bool) -> list[tuple[str, "object"]]:
    skipped = 0

    def report(err: CorpusFormatError) -> None:
        nonlocal skipped
        skipped += 1
        print(f"{path}:{err.line_no}: skipped: {err.reason}", file=sys.stderr)

    with open(path, encoding="utf-8") as f:
        pairs = list(parse_boxes_jsonl(f, strict=strict, on_error=report))
    if skipped:
        print(f"{path}: skipped {skipped} malformed line(s)", file=sys.stderr)
    return pairs


@contextmanager
def _out_stream(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as f:
            yield f


def _pool_map(jobs: int, fn, items: list):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_align(args) -> int:
    a = _read_auto(args.auto)
    m = _read_manual(args.manual)
    mu = align(a, m)
    with _out_stream(args.out) as out:
        print("a_index\ta_word\tm_index\tm_word\tcost", file=out)
        for i, (j, cost) in enumerate(zip(mu.assignment, mu.per_pair_cost)):
            print(f"{i}\t{a.words[i].text}\t{j}\t{m.words[j]}\t{cost}", file=out)
    print(f"total_cost={mu.total_cost}", file=sys.stderr)
    return 0


def _cmd_build(args) -> int:
    narrative = sync.build_narrative(
        _read_auto(args.auto),
        _read_manual(args.manual),
        _read_trace(args.trace),
        dataset_id=args.dataset_id,
        image_id=args.image_id,
        annotator_id=args.annotator_id,
        threshold=args.threshold,
    )
    line = serialize_narrative(narrative).decode("utf-8")
    with _out_stream(args.out) as out:
        out.write(line)
    return 0


def _cmd_qc(args) -> int:
    if args.corpus is not None:
        narratives = _load_corpus(args.corpus, args.strict)
        kept = 0
        with _out_stream(args.out) as out:
            for n in narratives:
                if args.drop_failed and (n.qc is None or not n.qc.passed):
                    continue
                kept += 1
                out.write(serialize_narrative(n).decode("utf-8"))
        print(f"kept={kept} of {len(narratives)}", file=sys.stderr)
        return 0
    if args.auto is None or args.manual is None:
        raise UsageError("qc requires either --corpus or both --auto and --manual")
    verdict = sync.quality_gate(_read_auto(args.auto), _read_manual(args.manual), args.threshold)
    record = {
        "raw_distance": verdict.raw_distance,
        "normalized_distance": round(verdict.normalized_distance, 6),
        "threshold": round(verdict.threshold, 6),
        "pass": verdict.passed,
    }
    if verdict.reason is not None:
        record["reason"] = verdict.reason
    with _out_stream(args.out) as out:
        print(json.dumps(record, separators=(",", ":")), file=out)
    return 0


def _features_record(narrative: LocalizedNarrative, args) -> dict:
    vectors = features.trace_feature_sequence(
        narrative.traces, args.delta, args.segment_duration
    )
    record = {
        "dataset_id": narrative.dataset_id,
        "image_id": narrative.image_id,
        "annotator_id": narrative.annotator_id,
        "delta": round(args.delta, 6),
        "segment_duration": round(args.segment_duration, 6),
        "vectors": [[round(v, 6) for v in vec.as_tuple()] for vec in vectors],
    }
    if args.sinusoid_dim > 0:
        record["position_encodings"] = [
            [round(float(v), 6) for v in features.sinusoid_encoding(pos, args.sinusoid_dim)]
            for pos in range(len(vectors))
        ]
    return record


def _cmd_features(args) -> int:
    narratives = _load_corpus(args.corpus, args.strict)
    records = _pool_map(args.jobs, lambda n: _features_record(n, args), narratives)
    with _out_stream(args.out) as out:
        for record in records:
            print(json.dumps(record, separators=(",", ":")), file=out)
    return 0


def _score_pair(pair) -> dict:
    image_id, cand, ref = pair
    return {
        "image_id": image_id,
        "rouge_l": metrics.rouge_l(cand, ref),
        "rouge_1_f1": metrics.rouge_1_f1(cand, ref),
        "bleu1": metrics.bleu(cand, ref, max_n=1),
        "bleu4": metrics.bleu(cand, ref, max_n=4),
    }


def _first_by_image(narratives: list[LocalizedNarrative], path: str) -> dict[str, list[str]]:
    captions: dict[str, list[str]] = {}
    for n in narratives:
        if n.image_id in captions:
            print(f"{path}: duplicate image_id {n.image_id}, keeping first", file=sys.stderr)
            continue
        captions[n.image_id] = tokenize(n.caption)
    return captions


def _cmd_eval(args) -> int:
    pred = _first_by_image(_load_corpus(args.pred, args.strict), args.pred)
    ref = _first_by_image(_load_corpus(args.ref, args.strict), args.ref)
    common = sorted(set(pred) & set(ref))
    missing = len(set(pred) ^ set(ref))
    if missing:
        print(f"{missing} image(s) present on one side only", file=sys.stderr)
    if not common:
        raise TracecapError("no image_id appears in both prediction and reference files")
    rows = _pool_map(args.jobs, _score_pair, [(i, pred[i], ref[i]) for i in common])
    names = ("rouge_l", "rouge_1_f1", "bleu1", "bleu4")
    mean = {k: sum(r[k] for r in rows) / len(rows) for k in names}
    with _out_stream(args.out) as out:
        print("image_id\t" + "\t".join(names), file=out)
        for row in rows:
            print(row["image_id"] + "\t" + "\t".join(f"{row[k]:.6f}" for k in names), file=out)
        print("mean\t" + "\t".join(f"{mean[k]:.6f}" for k in names), file=out)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as f:
            json.dump({"per_image": rows, "mean": mean}, f, sort_keys=True)
            f.write("\n")
    if args.figure:
        from . import figures

        figures.render_eval_figure(rows, args.figure)
    return 0


def _cmd_stats(args) -> int:
    narratives = _load_corpus(args.corpus, args.strict)
    report = analysis.richness_report(narratives)
    nouns = analysis.nouns_per_caption_histogram(narratives)
    with _out_stream(args.out) as out:
        print(f"captions\t{report.captions}", file=out)
        for name in ("words", "nouns", "pronouns", "adjectives", "adpositions", "verbs"):
            print(f"mean_{name}\t{getattr(report, 'mean_' + name):.6f}", file=out)
    if args.nouns_out:
        with open(args.nouns_out, "w", encoding="utf-8") as f:
            print("nouns\tcaptions", file=f)
            for count in sorted(nouns):
                print(f"{count}\t{nouns[count]}", file=f)
    if args.figure:
        from . import figures

        figures.render_richness_figure(report, nouns, args.figure)
    return 0


def _histogram_from_corpus(args) -> analysis.Histogram2D:
    narratives = _load_corpus(args.corpus, args.strict)
    box_pairs = _load_boxes(args.boxes, args.strict)
    class_names = sorted({box.class_name for _, box in box_pairs if box.class_name})
    by_image: dict[str, list] = {}
    for image_id, box in box_pairs:
        by_image.setdefault(image_id, []).append(box)
    rng = (args.range[0], args.range[1])
    hist = analysis.Histogram2D.empty(rng, rng, args.bins)
    shards = max(1, args.jobs)
    chunks = [narratives[i::shards] for i in range(shards)]

    def accumulate(chunk) -> analysis.Histogram2D:
        shard = analysis.Histogram2D.empty(rng, rng, args.bins)
        for n in chunk:
            mentions = analysis.match_class_mentions(n, class_names)
            analysis.localization_histogram(
                mentions, by_image.get(n.image_id, []), into=shard
            )
        return shard

    return reduce(analysis.merge_histograms, _pool_map(shards, accumulate, chunks), hist)


def _cmd_hist(args) -> int:
    if args.merge:
        loaded = []
        for path in args.merge:
            loaded.append(analysis.Histogram2D.from_record(_load_json(path)))
        hist = reduce(analysis.merge_histograms, loaded)
    else:
        if args.corpus is None or args.boxes is None:
            raise UsageError("hist requires --corpus and --boxes (or --merge records)")
        hist = _histogram_from_corpus(args)
    with _out_stream(args.out) as out:
        print(f"# x_range {hist.x_range[0]:g} {hist.x_range[1]:g}", file=out)
        print(f"# y_range {hist.y_range[0]:g} {hist.y_range[1]:g}", file=out)
        print(
            f"# total {hist.total} out_of_range {hist.out_of_range}"
            f" skipped_mentions {hist.skipped_mentions}",
            file=out,
        )
        for row in hist.bins:
            print(" ".join(str(int(v)) for v in row), file=out)
    if args.record:
        with open(args.record, "w", encoding="utf-8") as f:
            json.dump(hist.to_record(), f, sort_keys=True, separators=(",", ":"))
            f.write("\n")
    if args.figure:
        from . import figures

        figures.render_histogram_figure(hist, args.figure)
    return 0


def _cmd_labelmap(args) -> int:
    narratives = _load_corpus(args.corpus, args.strict)
    if args.image_id is not None:
        narratives = [n for n in narratives if n.image_id == args.image_id]
    if not narratives:
        raise TracecapError("no narrative to convert")
    with open(args.library, encoding="utf-8") as f:
        lib = labelmap.load_mask_library(f)
    label_map = labelmap.narrative_to_labelmap(
        narratives[0], lib.class_names(), lib, args.width, args.height
    )
    with open(args.out, "wb") as f:
        f.write(labelmap.labelmap_to_pgm(label_map))
    legend_path = args.legend_out or args.out + ".legend.json"
    with open(legend_path, "w", encoding="utf-8") as f:
        f.write(labelmap.legend_to_json(label_map))
        f.write("\n")
    print(
        f"labelled={label_map.labelled_cells()}"
        f" skipped_mentions={label_map.skipped_mentions}"
        f" classes={len(label_map.class_ids)}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracecap",
        description="Build, gate, analyze, and consume trace-grounded image captions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, jobs: bool = False) -> None:
        p.add_argument("--out", help="write results here instead of stdout")
        p.add_argument("--strict", action="store_true", help="abort on malformed input lines")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="worker pool size")

    p = sub.add_parser("align", help="match an automatic transcript onto a manual caption")
    p.add_argument("--auto", required=True)
    p.add_argument("--manual", required=True)
    common(p)
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("build", help="fuse transcript, caption, and trace into one narrative")
    p.add_argument("--auto", required=True)
    p.add_argument("--manual", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--threshold", type=float, default=sync.DEFAULT_QC_THRESHOLD)
    p.add_argument("--dataset-id", default="local")
    p.add_argument("--image-id", default="image")
    p.add_argument("--annotator-id", default="cli")
    common(p)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("qc", help="gate a transcript pair, or filter a corpus by verdict")
    p.add_argument("--auto")
    p.add_argument("--manual")
    p.add_argument("--corpus")
    p.add_argument("--threshold", type=float, default=sync.DEFAULT_QC_THRESHOLD)
    p.add_argument("--drop-failed", action="store_true", help="drop narratives whose gate failed")
    common(p)
    p.set_defaults(func=_cmd_qc)

    p = sub.add_parser("features", help="emit trace feature sidecar records for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--segment-duration", type=float, default=features.DEFAULT_SEGMENT_DURATION)
    p.add_argument(
        "--sinusoid-dim",
        type=int,
        default=0,
        help="include positional encodings of this dimension (0 = omit)",
    )
    common(p, jobs=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("eval", help="score predicted captions against references")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--json-out", help="also write scores as a JSON record")
    p.add_argument("--figure", help="render score distributions to this image file")
    common(p, jobs=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="per-caption richness statistics for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--nouns-out", help="write the nouns-per-caption table here")
    p.add_argument("--figure", help="render richness charts to this image file")
    common(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("hist", help="localization histogram of trace points near boxes")
    p.add_argument("--corpus")
    p.add_argument("--boxes")
    p.add_argument("--bins", type=int, default=analysis.DEFAULT_BINS)
    p.add_argument(
        "--range",
        nargs=2,
        type=float,
        default=list(analysis.DEFAULT_RANGE),
        metavar=("LO", "HI"),
        help="box-relative range for both axes",
    )
    p.add_argument("--record", help="write the mergeable JSON record here")
    p.add_argument("--merge", nargs="+", help="merge these JSON records instead of accumulating")
    p.add_argument("--figure", help="render the heatmap to this image file")
    common(p, jobs=True)
    p.set_defaults(func=_cmd_hist)

    p = sub.add_parser("labelmap", help="convert one narrative into a semantic label map")
    p.add_argument("--corpus", required=True)
    p.add_argument("--library", required=True)
    p.add_argument("--image-id", help="select this narrative (default: first)")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--legend-out", help="legend JSON path (default: <out>.legend.json)")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_labelmap)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TracecapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> int:
    return run()
