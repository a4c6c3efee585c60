/**
 * Typed client for the annotation service's HTTP API.
 *
 * The service walks each session through created -> captured -> transcribed
 * -> finalized; every method here maps to one endpoint of that loop. Bodies
 * and responses use the corpus record schema, whose snake_case field names
 * are the wire format and are kept as-is.
 */

/** One pointer sample; coordinates are relative to the image (usually in [0, 1]). */
export interface TracePoint {
  x: number;
  y: number;
  t: number;
}

/** A word and the time interval during which it was produced. */
export interface TimedWord {
  utterance: string;
  start_time: number;
  end_time: number;
}

/** Session summary returned by the state-changing endpoints. */
export interface SessionInfo {
  session_id: string;
  image_ref: string;
  state: string;
}

/** Alignment-based quality verdict attached to a finalized narrative. */
export interface QcVerdict {
  raw_distance: number;
  normalized_distance: number;
  threshold: number;
  pass: boolean;
  reason?: string;
}

/** A finalized narrative in the corpus record schema. */
export interface NarrativeRecord {
  dataset_id: string;
  image_id: string;
  annotator_id: string;
  caption: string;
  timed_caption: TimedWord[];
  traces: TracePoint[][];
  qc?: QcVerdict;
}

/** Response body of the finalize endpoint. */
export interface FinalizeResult {
  session_id: string;
  state: string;
  narrative: NarrativeRecord;
  qc: QcVerdict;
}

/** Raised for non-2xx responses; carries the HTTP status and the detail text. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
  }
}

export interface NarrativeFilter {
  imageId?: string;
  qcPass?: boolean;
}

export interface AnnotationApi {
  createSession(imageRef: string, annotatorId?: string): Promise<SessionInfo>;
  submitCapture(
    sessionId: string,
    trace: TracePoint[][],
    autoTranscript: TimedWord[],
  ): Promise<SessionInfo>;
  submitTranscript(sessionId: string, caption: string): Promise<SessionInfo>;
  finalize(sessionId: string, threshold?: number): Promise<FinalizeResult>;
  listNarratives(filter?: NarrativeFilter): Promise<NarrativeRecord[]>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Builds a client bound to `baseUrl` (empty when the UI is served by the
 * service itself). `fetchImpl` is injectable for tests.
 */
export function createApi(baseUrl = "", fetchImpl?: FetchLike): AnnotationApi {
  const doFetch: FetchLike = fetchImpl ?? ((input, init) => globalThis.fetch(input, init));

  async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await doFetch(baseUrl + path, init);
    if (!response.ok) {
      let detail = `${response.status} ${response.statusText}`;
      try {
        const payload: unknown = await response.json();
        if (
          typeof payload === "object" &&
          payload !== null &&
          typeof (payload as { detail?: unknown }).detail === "string"
        ) {
          detail = (payload as { detail: string }).detail;
        }
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  return {
    createSession(imageRef, annotatorId = "anonymous") {
      return request<SessionInfo>("POST", "/api/sessions", {
        image_ref: imageRef,
        annotator_id: annotatorId,
      });
    },
    submitCapture(sessionId, trace, autoTranscript) {
      return request<SessionInfo>("POST", `/api/sessions/${sessionId}/capture`, {
        trace,
        auto_transcript: autoTranscript,
      });
    },
    submitTranscript(sessionId, caption) {
      return request<SessionInfo>("POST", `/api/sessions/${sessionId}/transcript`, { caption });
    },
    finalize(sessionId, threshold) {
      const body = threshold === undefined ? {} : { threshold };
      return request<FinalizeResult>("POST", `/api/sessions/${sessionId}/finalize`, body);
    },
    async listNarratives(filter = {}) {
      const params = new URLSearchParams();
      if (filter.imageId !== undefined) {
        params.set("image_id", filter.imageId);
      }
      if (filter.qcPass !== undefined) {
        params.set("qc_pass", String(filter.qcPass));
      }
      const query = params.toString();
      const payload = await request<{ narratives: NarrativeRecord[] }>(
        "GET",
        "/api/narratives" + (query ? `?${query}` : ""),
      );
      return payload.narratives;
    },
  };
}
