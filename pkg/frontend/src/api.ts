// Typed client for the leafassist JSON API. All responses are plain JSON;
// non-2xx responses carry {"error": {"code", "message"}} which surfaces here
// as ApiError so the UI can branch on the machine-readable code.

export interface DetectionBox {
  class_id: number;
  class_name: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  confidence: number;
}

export interface SourceRef {
  source_id: string;
  chunk_id: string;
}

export interface DiagnoseResponse {
  session_id: string;
  detections: DetectionBox[];
  image_width: number;
  image_height: number;
  answer: string;
  sources: SourceRef[];
}

export interface ChatResponse {
  session_id: string;
  answer: string;
  sources: SourceRef[];
}

export interface HealthResponse {
  status: string;
  store_size: number;
  detector_mode: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body?.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body: keep the status-line message
  }
  return new ApiError(response.status, code, message);
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    throw await parseError(response);
  }
  return (await response.json()) as T;
}

export class LeafApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async diagnose(file: File): Promise<DiagnoseResponse> {
    const form = new FormData();
    form.append("image", file, file.name);
    const response = await this.fetchFn(`${this.baseUrl}/api/diagnose`, {
      method: "POST",
      body: form,
    });
    return asJson<DiagnoseResponse>(response);
  }

  async chat(sessionId: string, message: string): Promise<ChatResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/api/chat`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, message }),
    });
    return asJson<ChatResponse>(response);
  }

  async health(): Promise<HealthResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/api/health`);
    return asJson<HealthResponse>(response);
  }
}

/** API base resolution: ?api= query param, then window.LEAFASSIST_API, then same origin. */
export function resolveApiBase(win: Pick<Window, "location"> & { LEAFASSIST_API?: string }): string {
  const fromQuery = new URLSearchParams(win.location.search).get("api");
  if (fromQuery) return fromQuery.replace(/\/$/, "");
  if (win.LEAFASSIST_API) return win.LEAFASSIST_API.replace(/\/$/, "");
  return "";
}
