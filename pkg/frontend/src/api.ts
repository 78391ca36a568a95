/**
 * Typed client for the review service API. All server communication goes
 * through here; the fetch implementation is injectable for tests.
 */

export interface ClassEntry {
  class_name: string;
  definition: string;
  source: string;
  has_selection: boolean;
}

export interface GenerationParams {
  temperature: number;
  top_p: number;
  repetition_penalty: number;
  max_tokens: number;
  n: number;
}

export interface CandidatePool {
  class_name: string;
  candidates: string[];
  generation_params: GenerationParams;
}

export interface SelectionRecord {
  class_name: string;
  description: string;
  selected_index: number;
  selected_by: string;
  timestamp: string;
}

export interface RunEntry {
  run_id: string;
  n_cases: number;
}

export interface CaseIndexEntry {
  case_id: number;
  image_id: string;
  class_name: string;
  n_gt: number;
  n_pred: number;
}

export interface PairScore {
  pred: number;
  gt: number;
  iou: number;
  loc: number;
  shape: number;
  cls: number;
}

export interface PredictionBox {
  label: string;
  box: [number, number, number, number];
  score: number;
  rank: number;
}

export interface CasePayload {
  case_id: number;
  run_id: string;
  image_id: string;
  class_name: string;
  dims: { width: number; height: number } | null;
  gt_boxes: [number, number, number, number][];
  predictions: PredictionBox[];
  pairs: PairScore[];
  unmatched_preds: number[];
  unmatched_gts: number[];
  image: string | null;
}

export class ApiError extends Error {
  status: number;
  payload: Record<string, unknown>;

  constructor(status: number, payload: Record<string, unknown>) {
    super(typeof payload.error === "string" ? payload.error : `HTTP ${status}`);
    this.status = status;
    this.payload = payload;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private base: string;
  private fetchImpl: FetchLike;

  constructor(base = "", fetchImpl: FetchLike = (...args) => fetch(...args)) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    const body = (await resp.json()) as T;
    if (!resp.ok) {
      throw new ApiError(resp.status, body as Record<string, unknown>);
    }
    return body;
  }

  getClasses(): Promise<ClassEntry[]> {
    return this.request("/api/classes");
  }

  getCandidates(className: string): Promise<CandidatePool> {
    return this.request(
      `/api/classes/${encodeURIComponent(className)}/candidates`
    );
  }

  postSelection(className: string, index: number): Promise<SelectionRecord> {
    return this.request(
      `/api/classes/${encodeURIComponent(className)}/selection`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ index }),
      }
    );
  }

  getRuns(): Promise<RunEntry[]> {
    return this.request("/api/runs");
  }

  getCases(runId: string): Promise<CaseIndexEntry[]> {
    return this.request(`/api/runs/${encodeURIComponent(runId)}/cases`);
  }

  getCase(runId: string, caseId: number): Promise<CasePayload> {
    return this.request(
      `/api/runs/${encodeURIComponent(runId)}/cases/${caseId}`
    );
  }
}
