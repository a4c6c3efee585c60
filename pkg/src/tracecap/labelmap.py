"""Labelled trace segments to semantic label maps.

Each class mention contributes its trace segment's convex hull; the hull
is rasterized and used to retrieve the best-overlapping mask of that
class from a mask library; retrieved masks are composited in mention
order onto an initially unlabelled map. Object masks overwrite anything
already on the map; background masks only write unlabelled cells or
cells holding another background class, never an object.

Masks are binary grids at arbitrary resolution; retrieval scales a
candidate's tight content onto the hull's bounding box before comparing,
so a library mask matches regardless of its native resolution. The
library file is one record per line: {class, kind, width, height, rows}
with per-row run lengths alternating zeros and ones, zeros first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .analysis import match_class_mentions
from .model import LocalizedNarrative, TracecapError

UNLABELLED = 0

KINDS = ("object", "background")

Point = tuple[float, float]


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence[Point]) -> list[Point]:
    """Counter-clockwise convex hull vertices (monotone chain).

    Collinear points are excluded from the hull boundary. One or two
    distinct points come back as-is (degenerate polygon). Vertices are
    always a subset of the input points.
    """
    if not points:
        raise TracecapError("cannot take the hull of no points")
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts
    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        # All points collinear; keep the two extremes.
        return [pts[0], pts[-1]]
    return hull


def rasterize_polygon(poly: Sequence[Point], width: int, height: int) -> np.ndarray:
    """Binary (height, width) mask of cells whose center lies inside.

    Even-odd rule over normalized [0,1] coordinates; cell (ix, iy) has
    its center at ((ix+0.5)/width, (iy+0.5)/height). Degenerate polygons
    (single point, segment, zero area) mark the cells they pass through.
    """
    if width <= 0 or height <= 0:
        raise TracecapError(f"mask dimensions must be positive, got {width}x{height}")
    mask = np.zeros((height, width), dtype=bool)
    pts = [(float(x), float(y)) for x, y in poly]
    if not pts:
        return mask
    distinct = sorted(set(pts))
    if len(distinct) <= 2 or len(pts) < 3:
        _mark_segments(mask, distinct, width, height)
        return mask

    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    grid_x, grid_y = np.meshgrid(xs, ys)
    inside = np.zeros((height, width), dtype=bool)
    for (x1, y1), (x2, y2) in zip(pts, pts[1:] + pts[:1]):
        crosses = (y1 > grid_y) != (y2 > grid_y)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x1 + (grid_y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (grid_x < x_at)
    if not inside.any():
        # Zero-area polygon: fall back to its segments.
        _mark_segments(mask, pts, width, height)
        return mask
    return inside


def _mark_segments(mask: np.ndarray, pts: list[Point], width: int, height: int) -> None:
    def mark(x: float, y: float) -> None:
        ix = min(width - 1, max(0, int(x * width)))
        iy = min(height - 1, max(0, int(y * height)))
        if 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0:
            mask[iy, ix] = True

    if len(pts) == 1:
        mark(*pts[0])
        return
    steps = 4 * max(width, height)
    for (x1, y1), (x2, y2) in zip(pts, pts[1:]):
        for s in range(steps + 1):
            f = s / steps
            mark(x1 + f * (x2 - x1), y1 + f * (y2 - y1))


# ---------------------------------------------------------------------------
# Mask library and retrieval
# ---------------------------------------------------------------------------


@dataclass
class MaskLibrary:
    """Binary masks grouped by class, each class marked object or background."""

    kinds: dict[str, str] = field(default_factory=dict)
    masks: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def add(self, class_name: str, kind: str, mask: np.ndarray) -> None:
        if kind not in KINDS:
            raise TracecapError(f"unknown class kind {kind!r}")
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise TracecapError("library masks must be 2-D")
        current = self.kinds.setdefault(class_name, kind)
        if current != kind:
            raise TracecapError(f"class {class_name!r} registered as {current}, got {kind}")
        self.masks.setdefault(class_name, []).append(mask)

    def kind(self, class_name: str) -> str:
        if class_name not in self.kinds:
            raise TracecapError(f"class {class_name!r} not in library")
        return self.kinds[class_name]

    def candidates(self, class_name: str) -> list[np.ndarray]:
        if class_name not in self.masks or not self.masks[class_name]:
            raise TracecapError(f"class {class_name!r} not in library")
        return self.masks[class_name]

    def class_names(self) -> list[str]:
        return sorted(self.masks)


def _tight_bbox(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return cols[0], rows[0], cols[-1] + 1, rows[-1] + 1


def _scale_nearest(content: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = content.shape
    rows = np.minimum(((np.arange(out_h) + 0.5) * in_h / out_h).astype(int), in_h - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * in_w / out_w).astype(int), in_w - 1)
    return content[np.ix_(rows, cols)]


def _place_candidate(candidate: np.ndarray, bbox: tuple[int, int, int, int], shape) -> np.ndarray:
    x0, y0, x1, y1 = bbox
    placed = np.zeros(shape, dtype=bool)
    tight = _tight_bbox(candidate)
    if tight is None:
        return placed
    cx0, cy0, cx1, cy1 = tight
    placed[y0:y1, x0:x1] = _scale_nearest(candidate[cy0:cy1, cx0:cx1], y1 - y0, x1 - x0)
    return placed


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def retrieve_mask(
    hull_mask: np.ndarray, class_name: str, lib: MaskLibrary
) -> tuple[np.ndarray, int]:
    """Best same-class library mask for a hull, placed at the hull's box.

    Each candidate's tight content is scaled onto the hull mask's tight
    bounding box; the one maximizing IoU with the hull mask wins, ties
    going to the lowest index. Returns the placed mask at the hull's
    resolution together with the winning index.
    """
    hull_mask = np.asarray(hull_mask, dtype=bool)
    bbox = _tight_bbox(hull_mask)
    best_mask: np.ndarray | None = None
    best_index = -1
    best_iou = -1.0
    for index, candidate in enumerate(lib.candidates(class_name)):
        if bbox is None:
            placed = np.zeros(hull_mask.shape, dtype=bool)
        else:
            placed = _place_candidate(candidate, bbox, hull_mask.shape)
        score = _iou(hull_mask, placed)
        if score > best_iou:
            best_iou = score
            best_mask = placed
            best_index = index
    assert best_mask is not None  # library guarantees >= 1 candidate
    return best_mask, best_index


# ---------------------------------------------------------------------------
# Label maps and compositing
# ---------------------------------------------------------------------------


@dataclass
class LabelMap:
    """Grid of class ids; 0 is the UNLABELLED sentinel, ids start at 1."""

    width: int
    height: int
    labels: np.ndarray
    class_ids: dict[str, int] = field(default_factory=dict)
    kinds: dict[int, str] = field(default_factory=dict)
    skipped_mentions: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int32)
        if self.labels.shape != (self.height, self.width):
            raise TracecapError("label grid shape does not match width/height")

    @classmethod
    def empty(cls, width: int, height: int) -> "LabelMap":
        if width <= 0 or height <= 0:
            raise TracecapError(f"map dimensions must be positive, got {width}x{height}")
        return cls(width=width, height=height, labels=np.zeros((height, width), dtype=np.int32))

    def id_for(self, class_name: str, kind: str) -> int:
        if kind not in KINDS:
            raise TracecapError(f"unknown class kind {kind!r}")
        if class_name in self.class_ids:
            cid = self.class_ids[class_name]
            if self.kinds[cid] != kind:
                raise TracecapError(f"class {class_name!r} already registered as {self.kinds[cid]}")
            return cid
        cid = len(self.class_ids) + 1
        self.class_ids[class_name] = cid
        self.kinds[cid] = kind
        return cid

    def labelled_cells(self) -> int:
        return int((self.labels != UNLABELLED).sum())

    def legend(self) -> dict[int, dict[str, str]]:
        return {cid: {"class": name, "kind": self.kinds[cid]} for name, cid in self.class_ids.items()}

    def copy(self) -> "LabelMap":
        return LabelMap(
            width=self.width,
            height=self.height,
            labels=self.labels.copy(),
            class_ids=dict(self.class_ids),
            kinds=dict(self.kinds),
            skipped_mentions=self.skipped_mentions,
        )


def composite(label_map: LabelMap, mask: np.ndarray, class_name: str, kind: str) -> LabelMap:
    """Paste a mask onto the map under the object/background rules.

    Objects overwrite every cell they cover. Backgrounds write only
    unlabelled cells and cells holding another background class; cells
    holding an object class are untouched. Returns a new map.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (label_map.height, label_map.width):
        raise TracecapError(
            f"mask shape {mask.shape} does not match map {label_map.height}x{label_map.width}"
        )
    out = label_map.copy()
    cid = out.id_for(class_name, kind)
    if kind == "object":
        out.labels[mask] = cid
    else:
        background_ids = [i for i, k in out.kinds.items() if k == "background"]
        writable = (out.labels == UNLABELLED) | np.isin(out.labels, background_ids)
        out.labels[mask & writable] = cid
    return out


def narrative_to_labelmap(
    narrative: LocalizedNarrative,
    class_names: Iterable[str],
    lib: MaskLibrary,
    width: int,
    height: int,
) -> LabelMap:
    """Composite retrieved masks for every class mention, in caption order.

    Mentions with empty trace segments are skipped and counted on the
    returned map. Mentions of classes missing from the library raise.
    """
    label_map = LabelMap.empty(width, height)
    for class_name, segment in match_class_mentions(narrative, class_names):
        if not segment:
            label_map.skipped_mentions += 1
            continue
        hull = convex_hull([(p.x, p.y) for p in segment])
        hull_mask = rasterize_polygon(hull, width, height)
        placed, _ = retrieve_mask(hull_mask, class_name, lib)
        label_map = composite(label_map, placed, class_name, lib.kind(class_name))
    return label_map


# ---------------------------------------------------------------------------
# Serialization: library records and map export
# ---------------------------------------------------------------------------


def _encode_rows(mask: np.ndarray) -> list[list[int]]:
    rows = []
    for row in np.asarray(mask, dtype=bool):
        runs = [0]  # zeros first
        value = False
        for cell in row:
            if cell == value:
                runs[-1] += 1
            else:
                runs.append(1)
                value = not value
        rows.append(runs)
    return rows


def _decode_rows(rows: list[list[int]], width: int, height: int) -> np.ndarray:
    if len(rows) != height:
        raise TracecapError(f"mask rows {len(rows)} do not match height {height}")
    mask = np.zeros((height, width), dtype=bool)
    for iy, runs in enumerate(rows):
        pos = 0
        value = False
        for run in runs:
            if run < 0 or pos + run > width:
                raise TracecapError(f"row {iy} run lengths exceed width {width}")
            if value:
                mask[iy, pos : pos + run] = True
            pos += run
            value = not value
        if pos != width:
            raise TracecapError(f"row {iy} run lengths sum to {pos}, want {width}")
    return mask


def mask_library_to_lines(lib: MaskLibrary) -> list[str]:
    lines = []
    for class_name in lib.class_names():
        for mask in lib.candidates(class_name):
            record = {
                "class": class_name,
                "kind": lib.kind(class_name),
                "width": mask.shape[1],
                "height": mask.shape[0],
                "rows": _encode_rows(mask),
            }
            lines.append(json.dumps(record, separators=(",", ":")))
    return lines


def load_mask_library(stream: Iterable[str | bytes]) -> MaskLibrary:
    lib = MaskLibrary()
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
            mask = _decode_rows(record["rows"], int(record["width"]), int(record["height"]))
            lib.add(record["class"], record["kind"], mask)
        except (KeyError, TypeError, ValueError, TracecapError) as exc:
            raise TracecapError(f"mask library line {line_no}: {exc}")
    return lib


def labelmap_to_pgm(label_map: LabelMap) -> bytes:
    """Binary PGM (P5) of class ids; requires at most 255 classes."""
    if label_map.labels.max(initial=0) > 255:
        raise TracecapError("PGM export supports at most 255 class ids")
    header = f"P5\n{label_map.width} {label_map.height}\n255\n".encode("ascii")
    return header + label_map.labels.astype(np.uint8).tobytes()


def legend_to_json(label_map: LabelMap) -> str:
    legend = {str(UNLABELLED): {"class": "", "kind": "unlabelled"}}
    for cid, entry in sorted(label_map.legend().items()):
        legend[str(cid)] = entry
    return json.dumps(legend, indent=2, sort_keys=True)
