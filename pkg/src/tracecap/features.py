"""Trace-conditioning features for controlled captioning.

A trace is cut into fixed-duration pseudo-segments (0.4 s by default, a
prior median word duration), each represented by its encapsulating box
as a 5-D vector (x0, y0, x1, y1, area) in normalized coordinates. The
boxes can be expanded by an offset delta in every direction: delta=1.0
collapses every vector to (0, 0, 1, 1, 1), discarding position and
keeping only the duration signal carried by the vector count; delta=0.1
keeps coarse position. Sinusoidal encodings index a pseudo-segment's
order in the sequence. Proposal appearance vectors (default 16 proposals
of dimension 2048) are opaque external inputs; only their location
vectors are computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BoundingBox, MouseTrace, TracecapError, TracePoint

DEFAULT_SEGMENT_DURATION = 0.4
DEFAULT_SINUSOID_DIM = 512
DEFAULT_PROPOSAL_COUNT = 16
DEFAULT_APPEARANCE_DIM = 2048

_AREA_TOL = 1e-9


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


@dataclass(frozen=True)
class LocationVector:
    """A box plus its area, all in [0,1]; the 5-D location feature."""

    x0: float
    y0: float
    x1: float
    y1: float
    area: float

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1", "area"):
            v = getattr(self, name)
            if not (-_AREA_TOL <= v <= 1 + _AREA_TOL):
                raise TracecapError(f"location vector field {name}={v} outside [0,1]")
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise TracecapError("location vector corners inverted")
        if abs(self.area - (self.x1 - self.x0) * (self.y1 - self.y0)) > _AREA_TOL:
            raise TracecapError("location vector area inconsistent with corners")

    @classmethod
    def from_corners(cls, x0: float, y0: float, x1: float, y1: float) -> "LocationVector":
        """Clamp corners into [0,1] and fill in the area."""
        x0, y0, x1, y1 = _clamp01(x0), _clamp01(y0), _clamp01(x1), _clamp01(y1)
        return cls(x0=x0, y0=y0, x1=x1, y1=y1, area=(x1 - x0) * (y1 - y0))

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1, self.area)


@dataclass(frozen=True)
class PseudoSegment:
    """One fixed-duration window of the trace and the points inside it."""

    t_start: float
    t_end: float
    points: tuple[TracePoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if self.t_end < self.t_start:
            raise TracecapError(f"pseudo-segment window inverted: [{self.t_start}, {self.t_end}]")


@dataclass(frozen=True)
class ProposalFeature:
    """An object proposal: opaque appearance vector plus location vector."""

    appearance: tuple[float, ...]
    location: LocationVector

    def __post_init__(self):
        object.__setattr__(self, "appearance", tuple(float(v) for v in self.appearance))
        if not self.appearance:
            raise TracecapError("appearance vector must be non-empty")


def proposal_feature_batch(
    appearances: list[list[float]], locations: list[LocationVector]
) -> tuple[ProposalFeature, ...]:
    """Zip appearances with locations; the dimension must be constant."""
    if len(appearances) != len(locations):
        raise TracecapError("appearance and location counts differ")
    dims = {len(v) for v in appearances}
    if len(dims) > 1:
        raise TracecapError(f"appearance dimensions differ within batch: {sorted(dims)}")
    return tuple(
        ProposalFeature(appearance=tuple(a), location=loc)
        for a, loc in zip(appearances, locations)
    )


def _points_by_time(trace: MouseTrace) -> list[TracePoint]:
    # Strokes may interleave in time; windowing treats the trace as one
    # timeline. Stable sort keeps stroke order for equal timestamps.
    return sorted(trace.points(), key=lambda p: p.t)


def pseudo_segment(
    trace: MouseTrace, segment_duration: float = DEFAULT_SEGMENT_DURATION
) -> list[PseudoSegment]:
    """Cut [T0, T1] into ceil((T1-T0)/segment_duration) windows.

    Windows are half-open [start, end) except the last, which is closed,
    so every point lands in exactly one window. Empty windows (pointer
    idle) are retained with empty point lists. A zero-duration trace
    yields a single degenerate window.
    """
    if segment_duration <= 0:
        raise TracecapError(f"segment duration must be > 0, got {segment_duration}")
    t_first, t_last = trace.time_bounds()
    total = t_last - t_first
    count = max(1, math.ceil(total / segment_duration))
    buckets: list[list[TracePoint]] = [[] for _ in range(count)]
    for p in _points_by_time(trace):
        idx = min(count - 1, int((p.t - t_first) // segment_duration))
        buckets[idx].append(p)
    segments = []
    for w in range(count):
        start = t_first + w * segment_duration
        end = min(t_first + (w + 1) * segment_duration, t_last)
        segments.append(PseudoSegment(t_start=start, t_end=max(start, end), points=tuple(buckets[w])))
    return segments


def encapsulating_box(points: list[TracePoint] | tuple[TracePoint, ...]) -> LocationVector:
    """Minimal axis-aligned box around the points, clamped to [0,1]."""
    if not points:
        raise TracecapError("cannot box an empty point set")
    return LocationVector.from_corners(
        min(p.x for p in points),
        min(p.y for p in points),
        max(p.x for p in points),
        max(p.y for p in points),
    )


def expand_box(b: LocationVector, delta: float) -> LocationVector:
    """Grow the box by delta in every direction, clamped to [0,1]."""
    if delta < 0:
        raise TracecapError(f"delta must be >= 0, got {delta}")
    return LocationVector.from_corners(b.x0 - delta, b.y0 - delta, b.x1 + delta, b.y1 + delta)


def trace_feature_sequence(
    trace: MouseTrace,
    delta: float,
    segment_duration: float = DEFAULT_SEGMENT_DURATION,
) -> list[LocationVector]:
    """One expanded encapsulating box per pseudo-segment window.

    Empty windows inherit the most recent non-empty window's box; leading
    empty windows use the first trace point's degenerate box. The output
    length depends only on the trace duration, never on delta.
    """
    windows = pseudo_segment(trace, segment_duration)
    first_point = _points_by_time(trace)[0]
    previous = encapsulating_box([first_point])
    out = []
    for window in windows:
        if window.points:
            previous = encapsulating_box(window.points)
        out.append(expand_box(previous, delta))
    return out


def sinusoid_encoding(position: int, dim: int = DEFAULT_SINUSOID_DIM) -> np.ndarray:
    """Fixed sine/cosine positional vector of an even dimension.

    Entry 2k is sin(position / 10000^(2k/dim)), entry 2k+1 the matching
    cosine; every entry lies in [-1, 1].
    """
    if dim <= 0 or dim % 2 != 0:
        raise TracecapError(f"encoding dimension must be even and positive, got {dim}")
    if position < 0:
        raise TracecapError(f"position must be >= 0, got {position}")
    k = np.arange(dim // 2, dtype=np.float64)
    angles = position / np.power(10000.0, 2.0 * k / dim)
    out = np.empty(dim, dtype=np.float64)
    out[0::2] = np.sin(angles)
    out[1::2] = np.cos(angles)
    return out


def proposal_location(box: BoundingBox, image_w: float, image_h: float) -> LocationVector:
    """Normalize a pixel-frame proposal box by the image size."""
    if image_w <= 0 or image_h <= 0:
        raise TracecapError(f"image dimensions must be positive, got {image_w}x{image_h}")
    return LocationVector.from_corners(
        box.x0 / image_w, box.y0 / image_h, box.x1 / image_w, box.y1 / image_h
    )
