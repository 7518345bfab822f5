// Typed client for the /api endpoints. fetch is injectable so tests can
// stub the service; every rendered number in the UI comes from these
// payloads.

export interface ModelSummary {
  model_id: string;
  resolution: number;
  source_format: string;
  annotations: number;
}

export interface VoxelPreview {
  model_id: string;
  dim: number[];
  native_dim: number[];
  translate: number[];
  scale: number;
  cells: number[][];
  occupied_count: number;
}

export interface Question {
  id: string;
  text: string;
  scale: Record<string, string>;
}

export interface AnnotationBody {
  model_id: string;
  question_id: string;
  score: number;
}

export interface AnnotationReceipt extends AnnotationBody {
  annotation_id: number;
  annotator: string;
}

export interface AssessResult {
  model_id: string;
  question_id: string;
  score: number;
  peak_height: number;
  curve: number[];
  tolerance_band: number[];
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (...args) => fetch(...args),
    private token?: string,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      headers: this.headers(false),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  async listModels(): Promise<ModelSummary[]> {
    const body = await this.getJson<{ models: ModelSummary[] }>("/api/models");
    return body.models;
  }

  async listQuestions(): Promise<Question[]> {
    const body = await this.getJson<{ questions: Question[] }>("/api/questions");
    return body.questions;
  }

  voxelPreview(modelId: string, lod: number): Promise<VoxelPreview> {
    return this.getJson(`/api/models/${encodeURIComponent(modelId)}/voxels?lod=${lod}`);
  }

  postAnnotation(body: AnnotationBody): Promise<AnnotationReceipt> {
    return this.postJson("/api/annotations", body);
  }

  assess(modelId: string, questionId: string): Promise<AssessResult> {
    return this.postJson("/api/assess", {
      model_id: modelId,
      question_id: questionId,
    });
  }
}
