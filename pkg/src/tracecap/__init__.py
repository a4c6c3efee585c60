"""Toolkit for building, gating, analyzing, and consuming trace-grounded captions.

The pipeline: an annotator speaks (or types) while moving a pointer over
an image, producing a timestamped word stream and a mouse trace; they
then type the accurate caption. align() matches the word stream onto the
caption, transfer_timestamps() gives every caption word a time interval,
extract_segments() attaches the trace points inside it, and the quality
gate scores how well the two transcripts agree. Downstream modules turn
traces into captioning features, score captions, analyze corpora, and
composite labelled segments into semantic label maps.
"""

from .align import Matching, align, alignment_cost, edit_distance
from .analysis import (
    Histogram2D,
    RichnessReport,
    box_relative_coords,
    default_tagger,
    localization_histogram,
    match_class_mentions,
    merge_histograms,
    nouns_per_caption_histogram,
    richness_report,
)
from .features import (
    LocationVector,
    ProposalFeature,
    PseudoSegment,
    encapsulating_box,
    expand_box,
    proposal_location,
    pseudo_segment,
    sinusoid_encoding,
    trace_feature_sequence,
)
from .labelmap import (
    UNLABELLED,
    LabelMap,
    MaskLibrary,
    composite,
    convex_hull,
    labelmap_to_pgm,
    legend_to_json,
    load_mask_library,
    mask_library_to_lines,
    narrative_to_labelmap,
    rasterize_polygon,
    retrieve_mask,
)
from .metrics import bleu, bleu_1, bleu_4, rouge_1_f1, rouge_l
from .model import (
    AutomaticTranscript,
    BoundingBox,
    CorpusFormatError,
    LocalizedNarrative,
    ManualTranscript,
    MouseTrace,
    QcVerdict,
    TimedWord,
    TracecapError,
    TracePoint,
    WordGrounding,
    narrative_from_record,
    narrative_to_record,
    normalize_word,
    parse_boxes_jsonl,
    parse_narrative_jsonl,
    segment_points,
    serialize_narrative,
    tokenize,
)
from .sync import (
    DEFAULT_QC_THRESHOLD,
    build_narrative,
    extract_segments,
    quality_gate,
    trace_bounds,
    transfer_timestamps,
)

__version__ = "0.1.0"

__all__ = [
    "AutomaticTranscript",
    "BoundingBox",
    "CorpusFormatError",
    "DEFAULT_QC_THRESHOLD",
    "Histogram2D",
    "LabelMap",
    "LocalizedNarrative",
    "LocationVector",
    "ManualTranscript",
    "MaskLibrary",
    "Matching",
    "MouseTrace",
    "ProposalFeature",
    "PseudoSegment",
    "QcVerdict",
    "RichnessReport",
    "TimedWord",
    "TracePoint",
    "TracecapError",
    "UNLABELLED",
    "WordGrounding",
    "align",
    "alignment_cost",
    "bleu",
    "bleu_1",
    "bleu_4",
    "box_relative_coords",
    "build_narrative",
    "composite",
    "convex_hull",
    "default_tagger",
    "edit_distance",
    "encapsulating_box",
    "expand_box",
    "extract_segments",
    "labelmap_to_pgm",
    "legend_to_json",
    "load_mask_library",
    "localization_histogram",
    "mask_library_to_lines",
    "match_class_mentions",
    "merge_histograms",
    "narrative_from_record",
    "narrative_to_labelmap",
    "narrative_to_record",
    "normalize_word",
    "nouns_per_caption_histogram",
    "parse_boxes_jsonl",
    "parse_narrative_jsonl",
    "proposal_location",
    "pseudo_segment",
    "quality_gate",
    "rasterize_polygon",
    "retrieve_mask",
    "richness_report",
    "rouge_1_f1",
    "rouge_l",
    "segment_points",
    "serialize_narrative",
    "sinusoid_encoding",
    "tokenize",
    "trace_bounds",
    "trace_feature_sequence",
    "transfer_timestamps",
]
