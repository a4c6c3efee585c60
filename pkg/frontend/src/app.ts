/**
 * The annotator app: one image at a time through capture (hover narration
 * with timed typing), transcription, and review against the annotation
 * service. All state is server-authoritative once submitted; the app only
 * buffers the current phase's input.
 */

import { ApiError } from "./api.js";
import type {
  AnnotationApi,
  FinalizeResult,
  SessionInfo,
  TimedWord,
  TracePoint,
} from "./api.js";
import { TraceRecorder, TypedWordStream } from "./capture.js";
import type { TraceRecorderOptions } from "./capture.js";
import { drawTrace, wordSegments } from "./review.js";

export type Phase = "capture" | "transcribe" | "review";

const CANVAS_WIDTH = 640;
const CANVAS_HEIGHT = 480;
const REPLAY_DURATION_MS = 2000;
const REPLAY_FRAME_MS = 40;

export interface AnnotatorAppOptions extends TraceRecorderOptions {
  container: HTMLElement;
  api: AnnotationApi;
  /** Image refs offered in order; "next image" wraps around. */
  images: string[];
  annotatorId?: string;
  /** Millisecond clock, injectable for scripted sessions. */
  now?: () => number;
  /** Sample pointer positions only while a button is pressed. */
  pressedHover?: boolean;
}

export interface AnnotatorApp {
  readonly element: HTMLElement;
  phase(): Phase;
  session(): SessionInfo | null;
  result(): FinalizeResult | null;
  highlightedWord(): number | null;
  start(): Promise<void>;
  submitCapture(): Promise<boolean>;
  submitCaption(): Promise<boolean>;
  redo(): Promise<void>;
  nextImage(): Promise<void>;
  destroy(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

/**
 * Pointer position relative to the canvas. Falls back to the width/height
 * attributes when layout reports a zero-sized box (headless DOM).
 */
function relativePosition(canvas: HTMLCanvasElement, event: MouseEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  const width = rect.width || canvas.width || 1;
  const height = rect.height || canvas.height || 1;
  return { x: (event.clientX - rect.left) / width, y: (event.clientY - rect.top) / height };
}

function formatInterval(word: TimedWord): string {
  return `${word.start_time.toFixed(2)}–${word.end_time.toFixed(2)} s`;
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return `rejected (${error.status}): ${error.message}`;
  }
  return error instanceof Error ? error.message : String(error);
}

export function createAnnotatorApp(options: AnnotatorAppOptions): AnnotatorApp {
  if (options.images.length === 0) {
    throw new Error("at least one image is required");
  }
  const api = options.api;
  const annotatorId = options.annotatorId ?? "anonymous";
  const now = options.now ?? (() => performance.now());
  const recorder = new TraceRecorder(options);
  const typing = new TypedWordStream();

  let phase: Phase = "capture";
  let session: SessionInfo | null = null;
  let result: FinalizeResult | null = null;
  let segments: TracePoint[][][] = [];
  let highlighted: number | null = null;
  let imageIndex = 0;
  let epoch = 0;
  let pointerDown = false;
  let replayTimer: ReturnType<typeof setInterval> | null = null;

  const clock = (): number => Math.max(0, now() - epoch);

  // --- static skeleton -----------------------------------------------------

  const root = el("div", "annotator");
  const header = el("header", "annotator-header");
  header.appendChild(el("h1", "", "Trace-grounded caption annotator"));
  const statusLine = el("span", "session-state", "no session");
  header.appendChild(statusLine);
  root.appendChild(header);

  const stage = el("div", "stage");
  const imagePane = el("div", "image-pane");
  const image = el("img", "subject");
  image.draggable = false;
  const canvas = el("canvas", "trace-canvas");
  canvas.width = CANVAS_WIDTH;
  canvas.height = CANVAS_HEIGHT;
  imagePane.appendChild(image);
  imagePane.appendChild(canvas);
  const sidePane = el("div", "side-pane");
  stage.appendChild(imagePane);
  stage.appendChild(sidePane);
  root.appendChild(stage);
  options.container.appendChild(root);

  // the current phase pane's error slot and live widgets
  let errorLine: HTMLParagraphElement | null = null;
  let wordStreamList: HTMLUListElement | null = null;
  let sampleCount: HTMLSpanElement | null = null;
  let captionInput: HTMLTextAreaElement | null = null;
  let wordCount: HTMLDivElement | null = null;
  let segmentInfo: HTMLParagraphElement | null = null;
  let wordSpans: HTMLSpanElement[] = [];

  function updateStatus(): void {
    statusLine.textContent = session
      ? `${session.image_ref} · session ${session.session_id.slice(0, 8)} · ${session.state}`
      : "no session";
  }

  function showError(message: string): void {
    if (errorLine !== null) {
      errorLine.textContent = message;
      errorLine.hidden = false;
    }
  }

  function clearError(): void {
    if (errorLine !== null) {
      errorLine.textContent = "";
      errorLine.hidden = true;
    }
  }

  function stopReplay(): void {
    if (replayTimer !== null) {
      clearInterval(replayTimer);
      replayTimer = null;
    }
  }

  // --- capture phase ---------------------------------------------------------

  function onPointerMove(event: MouseEvent): void {
    if (phase !== "capture" || session === null) {
      return;
    }
    if (options.pressedHover && !pointerDown) {
      return;
    }
    const { x, y } = relativePosition(canvas, event);
    if (recorder.sample(x, y, clock())) {
      drawTrace(canvas, recorder.snapshot());
      if (sampleCount !== null) {
        const total = recorder.snapshot().reduce((n, stroke) => n + stroke.length, 0);
        sampleCount.textContent = `${total} samples`;
      }
    }
  }

  canvas.addEventListener("pointermove", onPointerMove);
  canvas.addEventListener("pointerdown", (event) => {
    pointerDown = true;
    onPointerMove(event);
  });
  canvas.addEventListener("pointerup", () => {
    pointerDown = false;
    if (options.pressedHover) {
      recorder.breakStroke();
    }
  });
  canvas.addEventListener("pointerleave", () => {
    pointerDown = false;
    if (phase === "capture") {
      recorder.breakStroke();
    }
  });

  function appendWordChip(word: TimedWord): void {
    if (wordStreamList !== null) {
      wordStreamList.appendChild(
        el("li", "word-chip", `${word.utterance} · ${formatInterval(word)}`),
      );
    }
  }

  function renderCapture(): void {
    sidePane.replaceChildren();
    sidePane.appendChild(el("h2", "", "1 · Narrate"));
    sidePane.appendChild(
      el(
        "p",
        "instructions",
        "Move the pointer over the things you mention while typing your narration " +
          "here; every space stamps the word you just typed.",
      ),
    );
    const input = el("input", "speech-input");
    input.placeholder = "narrate here, word by word";
    input.addEventListener("keydown", (event) => {
      if (phase !== "capture") {
        return;
      }
      const word = typing.keystroke(event.key, clock());
      if (word !== null) {
        appendWordChip(word);
      }
    });
    sidePane.appendChild(input);
    wordStreamList = el("ul", "word-stream");
    sidePane.appendChild(wordStreamList);
    sampleCount = el("span", "sample-count", "0 samples");
    sidePane.appendChild(sampleCount);
    errorLine = el("p", "error-message");
    errorLine.hidden = true;
    sidePane.appendChild(errorLine);
    const submit = el("button", "submit-capture", "Submit capture");
    submit.addEventListener("click", () => {
      void submitCapture();
    });
    sidePane.appendChild(submit);
    input.focus();
  }

  async function submitCapture(): Promise<boolean> {
    if (phase !== "capture" || session === null) {
      return false;
    }
    if (recorder.isEmpty()) {
      showError(
        "No pointer data recorded — move the pointer over the image while " +
          "narrating, then submit again.",
      );
      return false;
    }
    clearError();
    const tail = typing.flush(clock());
    if (tail !== null) {
      appendWordChip(tail);
    }
    try {
      session = await api.submitCapture(session.session_id, recorder.snapshot(), typing.stream());
    } catch (error) {
      showError(describeError(error));
      return false;
    }
    updateStatus();
    phase = "transcribe";
    renderTranscribe();
    return true;
  }

  // --- transcription phase ---------------------------------------------------

  function countWords(caption: string): number {
    const trimmed = caption.trim();
    return trimmed === "" ? 0 : trimmed.split(/\s+/).length;
  }

  function renderTranscribe(): void {
    sidePane.replaceChildren();
    sidePane.appendChild(el("h2", "", "2 · Transcribe"));
    sidePane.appendChild(
      el("p", "instructions", "Write out the caption exactly as you narrated it."),
    );
    captionInput = el("textarea", "caption-input");
    captionInput.rows = 3;
    captionInput.addEventListener("input", () => {
      if (wordCount !== null && captionInput !== null) {
        const n = countWords(captionInput.value);
        wordCount.textContent = `${n} word${n === 1 ? "" : "s"}`;
      }
    });
    sidePane.appendChild(captionInput);
    wordCount = el("div", "word-count", "0 words");
    sidePane.appendChild(wordCount);
    errorLine = el("p", "error-message");
    errorLine.hidden = true;
    sidePane.appendChild(errorLine);
    const submit = el("button", "submit-caption", "Finalize");
    submit.addEventListener("click", () => {
      void submitCaption();
    });
    sidePane.appendChild(submit);
    captionInput.focus();
  }

  async function submitCaption(): Promise<boolean> {
    if (phase !== "transcribe" || session === null || captionInput === null) {
      return false;
    }
    clearError();
    try {
      if (session.state !== "transcribed") {
        session = await api.submitTranscript(session.session_id, captionInput.value);
        updateStatus();
      }
      result = await api.finalize(session.session_id);
    } catch (error) {
      showError(describeError(error));
      return false;
    }
    session = { ...session, state: result.state };
    updateStatus();
    segments = wordSegments(result.narrative);
    highlighted = null;
    phase = "review";
    renderReview();
    return true;
  }

  // --- review phase ------------------------------------------------------------

  function setHighlight(index: number | null): void {
    if (result === null) {
      return;
    }
    highlighted = index;
    wordSpans.forEach((span, i) => span.classList.toggle("highlighted", i === index));
    if (index === null) {
      if (segmentInfo !== null) {
        segmentInfo.textContent = "Hover a caption word to light up its trace segment.";
      }
      drawTrace(canvas, result.narrative.traces);
      return;
    }
    const word = result.narrative.timed_caption[index];
    const segment = segments[index];
    const points = segment.reduce((n, stroke) => n + stroke.length, 0);
    if (segmentInfo !== null) {
      segmentInfo.textContent =
        `“${word.utterance}” · ${formatInterval(word)} · ` +
        `${points} point${points === 1 ? "" : "s"}`;
    }
    drawTrace(canvas, result.narrative.traces, { highlight: segment });
  }

  function replay(): void {
    if (result === null) {
      return;
    }
    stopReplay();
    const traces = result.narrative.traces;
    const startedAt = now();
    replayTimer = setInterval(() => {
      const fraction = (now() - startedAt) / REPLAY_DURATION_MS;
      drawTrace(canvas, traces, { fraction });
      if (fraction >= 1) {
        stopReplay();
      }
    }, REPLAY_FRAME_MS);
  }

  function renderReview(): void {
    if (result === null) {
      return;
    }
    sidePane.replaceChildren();
    sidePane.appendChild(el("h2", "", "3 · Review"));
    const qc = result.qc;
    const verdict = el("p", `qc-verdict ${qc.pass ? "qc-pass" : "qc-fail"}`);
    verdict.textContent =
      `QC ${qc.pass ? "pass" : "fail"} · normalized distance ` +
      `${qc.normalized_distance.toFixed(4)} · threshold ${qc.threshold.toFixed(2)}` +
      (qc.reason !== undefined ? ` · ${qc.reason}` : "");
    sidePane.appendChild(verdict);

    const captionLine = el("p", "caption-words");
    wordSpans = result.narrative.timed_caption.map((word, index) => {
      const span = el("span", "caption-word", word.utterance);
      span.dataset.index = String(index);
      span.addEventListener("mouseover", () => setHighlight(index));
      span.addEventListener("mouseout", () => setHighlight(null));
      return span;
    });
    wordSpans.forEach((span, i) => {
      if (i > 0) {
        captionLine.appendChild(document.createTextNode(" "));
      }
      captionLine.appendChild(span);
    });
    sidePane.appendChild(captionLine);

    segmentInfo = el("p", "segment-info");
    sidePane.appendChild(segmentInfo);

    const replayButton = el("button", "replay-button", "Replay trace");
    replayButton.addEventListener("click", replay);
    sidePane.appendChild(replayButton);
    const redoButton = el("button", "redo-button", "Redo image");
    redoButton.addEventListener("click", () => {
      void redo();
    });
    sidePane.appendChild(redoButton);
    const nextButton = el("button", "next-button", "Next image");
    nextButton.addEventListener("click", () => {
      void nextImage();
    });
    sidePane.appendChild(nextButton);

    setHighlight(null);
  }

  // --- session control -----------------------------------------------------------

  async function beginSession(imageRef: string): Promise<void> {
    stopReplay();
    recorder.reset();
    typing.reset();
    result = null;
    segments = [];
    highlighted = null;
    pointerDown = false;
    epoch = now();
    session = await api.createSession(imageRef, annotatorId);
    image.setAttribute("src", imageRef);
    phase = "capture";
    renderCapture();
    updateStatus();
    drawTrace(canvas, []);
  }

  function redo(): Promise<void> {
    return beginSession(options.images[imageIndex]);
  }

  function nextImage(): Promise<void> {
    imageIndex = (imageIndex + 1) % options.images.length;
    return beginSession(options.images[imageIndex]);
  }

  return {
    element: root,
    phase: () => phase,
    session: () => session,
    result: () => result,
    highlightedWord: () => highlighted,
    start: () => beginSession(options.images[imageIndex]),
    submitCapture,
    submitCaption,
    redo,
    nextImage,
    destroy: () => {
      stopReplay();
      root.remove();
    },
  };
}
