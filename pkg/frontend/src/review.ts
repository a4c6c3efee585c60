/**
 * Review-phase helpers: mapping caption words to their trace segments and
 * painting the trace with a time-ordered color gradient.
 */

import type { NarrativeRecord, TracePoint } from "./api.js";

/**
 * Points whose timestamps fall inside [t0, t1], both bounds inclusive, with
 * stroke structure preserved and empty strokes dropped. Inclusive bounds mean
 * a point sitting exactly on a shared interval boundary belongs to both
 * neighbouring words' segments.
 */
export function segmentStrokes(strokes: TracePoint[][], t0: number, t1: number): TracePoint[][] {
  const segments: TracePoint[][] = [];
  for (const stroke of strokes) {
    const inside = stroke.filter((point) => point.t >= t0 && point.t <= t1);
    if (inside.length > 0) {
      segments.push(inside);
    }
  }
  return segments;
}

/**
 * One trace segment per caption word, in caption order. Every word gets
 * exactly one entry; a word whose interval covers no samples gets [].
 */
export function wordSegments(narrative: NarrativeRecord): TracePoint[][][] {
  return narrative.timed_caption.map((word) =>
    segmentStrokes(narrative.traces, word.start_time, word.end_time),
  );
}

/** First and last timestamp over all strokes, or null for an empty trace. */
export function timeSpan(strokes: TracePoint[][]): { t0: number; t1: number } | null {
  let t0 = Infinity;
  let t1 = -Infinity;
  for (const stroke of strokes) {
    for (const point of stroke) {
      t0 = Math.min(t0, point.t);
      t1 = Math.max(t1, point.t);
    }
  }
  return t0 <= t1 ? { t0, t1 } : null;
}

/** Color for a normalized time u in [0, 1]: early is cold blue, late is warm red. */
export function gradientColor(u: number): string {
  const clamped = Math.min(1, Math.max(0, u));
  const hue = Math.round(230 * (1 - clamped));
  return `hsl(${hue}, 85%, 55%)`;
}

/** The leading portion of the trace visible `fraction` of the way into a replay. */
export function visiblePortion(strokes: TracePoint[][], fraction: number): TracePoint[][] {
  const span = timeSpan(strokes);
  if (span === null) {
    return [];
  }
  const clamped = Math.min(1, Math.max(0, fraction));
  return segmentStrokes(strokes, span.t0, span.t0 + clamped * (span.t1 - span.t0));
}

export interface DrawOptions {
  /** Strokes to overdraw emphasized (a hovered word's segment). */
  highlight?: TracePoint[][];
  /** Replay cut-off: only the portion up to this fraction is painted. */
  fraction?: number;
}

// jsdom has no 2D contexts; remember the null per canvas instead of asking
// (and triggering a console error) on every repaint.
const contexts = new WeakMap<HTMLCanvasElement, CanvasRenderingContext2D | null>();

function context2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D | null {
  if (!contexts.has(canvas)) {
    let context: CanvasRenderingContext2D | null = null;
    try {
      context = canvas.getContext("2d");
    } catch {
      context = null;
    }
    contexts.set(canvas, context);
  }
  return contexts.get(canvas) ?? null;
}

function paintStroke(
  context: CanvasRenderingContext2D,
  canvas: HTMLCanvasElement,
  stroke: TracePoint[],
  span: { t0: number; t1: number },
  lineWidth: number,
): void {
  if (stroke.length === 0) {
    return;
  }
  const scale = span.t1 > span.t0 ? 1 / (span.t1 - span.t0) : 0;
  const first = stroke[0];
  if (stroke.length === 1) {
    context.fillStyle = gradientColor((first.t - span.t0) * scale);
    context.beginPath();
    context.arc(first.x * canvas.width, first.y * canvas.height, lineWidth, 0, Math.PI * 2);
    context.fill();
    return;
  }
  for (let i = 1; i < stroke.length; i++) {
    const from = stroke[i - 1];
    const to = stroke[i];
    context.strokeStyle = gradientColor((to.t - span.t0) * scale);
    context.lineWidth = lineWidth;
    context.lineCap = "round";
    context.beginPath();
    context.moveTo(from.x * canvas.width, from.y * canvas.height);
    context.lineTo(to.x * canvas.width, to.y * canvas.height);
    context.stroke();
  }
}

/**
 * Paints the trace as gradient-coloured polylines scaled to the canvas.
 * A headless DOM without 2D contexts makes this a no-op; every review
 * outcome the tests rely on lives in the DOM, not on the canvas.
 */
export function drawTrace(
  canvas: HTMLCanvasElement,
  strokes: TracePoint[][],
  options: DrawOptions = {},
): void {
  const context = context2d(canvas);
  if (context === null) {
    return;
  }
  context.clearRect(0, 0, canvas.width, canvas.height);
  const span = timeSpan(strokes);
  if (span === null) {
    return;
  }
  const visible = options.fraction === undefined ? strokes : visiblePortion(strokes, options.fraction);
  for (const stroke of visible) {
    paintStroke(context, canvas, stroke, span, 2);
  }
  for (const stroke of options.highlight ?? []) {
    paintStroke(context, canvas, stroke, span, 5);
  }
}
