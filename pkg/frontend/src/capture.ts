/**
 * Capture-phase state: the pointer trace and the timed-typing word stream.
 *
 * Both record against the same millisecond clock, so word intervals and
 * trace timestamps live on a single session timeline; times are converted
 * to seconds at the API boundary.
 */

import type { TimedWord, TracePoint } from "./api.js";

/** ~60 Hz: minimum spacing between two accepted pointer samples. */
export const DEFAULT_THROTTLE_MS = 1000 / 60;

/** Idle gap after which the next sample opens a new stroke. */
export const DEFAULT_STROKE_BREAK_MS = 1000;

/** Nudge applied when a sample would not advance the stroke clock. */
const MIN_TIME_STEP_S = 1e-4;

export interface TraceRecorderOptions {
  throttleMs?: number;
  strokeBreakMs?: number;
}

/**
 * Collects pointer samples into strokes.
 *
 * Samples are throttled to ~60 Hz, a stroke ends after one second of pointer
 * inactivity (or an explicit `breakStroke`), and timestamps are strictly
 * increasing within each stroke: a sample that would repeat the previous
 * stroke time is nudged forward instead of rejected, while a backwards clock
 * step falls to the throttle and is dropped.
 */
export class TraceRecorder {
  private readonly throttleMs: number;
  private readonly strokeBreakMs: number;
  private strokes: TracePoint[][] = [];
  private current: TracePoint[] | null = null;
  private lastAcceptedMs: number | null = null;

  constructor(options: TraceRecorderOptions = {}) {
    this.throttleMs = options.throttleMs ?? DEFAULT_THROTTLE_MS;
    this.strokeBreakMs = options.strokeBreakMs ?? DEFAULT_STROKE_BREAK_MS;
  }

  /** Records one pointer position; returns false when throttled away. */
  sample(x: number, y: number, atMs: number): boolean {
    if (this.lastAcceptedMs !== null && atMs - this.lastAcceptedMs < this.throttleMs) {
      return false;
    }
    if (
      this.current === null ||
      (this.lastAcceptedMs !== null && atMs - this.lastAcceptedMs > this.strokeBreakMs)
    ) {
      this.current = [];
      this.strokes.push(this.current);
    }
    let t = atMs / 1000;
    const previous = this.current[this.current.length - 1];
    if (previous !== undefined && t <= previous.t) {
      t = previous.t + MIN_TIME_STEP_S;
    }
    this.current.push({ x, y, t });
    this.lastAcceptedMs = atMs;
    return true;
  }

  /** Ends the current stroke (pointer up, or pointer leaving the image). */
  breakStroke(): void {
    this.current = null;
    this.lastAcceptedMs = null;
  }

  isEmpty(): boolean {
    return this.strokes.every((stroke) => stroke.length === 0);
  }

  /** Copies of the non-empty strokes recorded so far. */
  snapshot(): TracePoint[][] {
    return this.strokes
      .filter((stroke) => stroke.length > 0)
      .map((stroke) => stroke.map((point) => ({ ...point })));
  }

  reset(): void {
    this.strokes = [];
    this.current = null;
    this.lastAcceptedMs = null;
  }
}

/**
 * Builds the proxy word stream from keystrokes while the annotator talks
 * through the image ("timed typing"): each word is stamped by its
 * terminating space keystroke, and its interval runs from the previous
 * boundary — the preceding space, or the first keystroke of the stream.
 * A trailing word with no terminating space is closed by `flush`.
 */
export class TypedWordStream {
  private buffer = "";
  private boundaryMs: number | null = null;
  private words: TimedWord[] = [];

  /** Feeds one keyboard key; returns the word that key completed, if any. */
  keystroke(key: string, atMs: number): TimedWord | null {
    if (key === "Backspace") {
      this.buffer = this.buffer.slice(0, -1);
      return null;
    }
    if (key === " ") {
      const word = this.emit(atMs);
      this.boundaryMs = atMs;
      return word;
    }
    if (key.length === 1 && !/\s/.test(key)) {
      if (this.boundaryMs === null) {
        this.boundaryMs = atMs;
      }
      this.buffer += key;
    }
    // control keys ("Shift", "ArrowLeft", ...) never reach the buffer
    return null;
  }

  /** Closes a trailing word that was never followed by a space. */
  flush(atMs: number): TimedWord | null {
    return this.emit(atMs);
  }

  /** The word being typed right now, not yet stamped. */
  pending(): string {
    return this.buffer;
  }

  /** Copies of the words completed so far. */
  stream(): TimedWord[] {
    return this.words.map((word) => ({ ...word }));
  }

  reset(): void {
    this.buffer = "";
    this.boundaryMs = null;
    this.words = [];
  }

  private emit(atMs: number): TimedWord | null {
    if (!this.buffer || this.boundaryMs === null) {
      return null;
    }
    const word: TimedWord = {
      utterance: this.buffer,
      start_time: this.boundaryMs / 1000,
      end_time: Math.max(atMs, this.boundaryMs) / 1000,
    };
    this.words.push(word);
    this.buffer = "";
    return word;
  }
}
