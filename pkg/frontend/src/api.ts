// Typed client for the annotation service JSON API. All server interaction
// goes through this module; nothing else touches fetch.

export interface Meta {
  class_names: string[];
  joint_names: string[];
  bones: [number, number][];
  fps: number;
  num_sequences: number;
}

export interface QueueRow {
  id: string;
  position: number;
  score: number | null;
}

export interface SequenceDoc {
  id: string;
  fps: number;
  frames: number[][][]; // T x J x 3
  labels: number[][] | null; // T x m
  predictions: number[][] | null;
}

export interface IntervalPayload {
  start: number; // 1-based, inclusive
  end: number;
  class: string;
}

export interface RetrainStatus {
  state: "queued" | "running" | "done" | "failed";
  duration: number | null;
  eval_on_labeled: { micro_f1: number; macro_f1: number; sequences: number } | null;
  error: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const doc = await resp.json();
        if (doc && doc.detail) detail = String(doc.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  getMeta(): Promise<Meta> {
    return this.request<Meta>("/meta");
  }

  getQueue(): Promise<QueueRow[]> {
    return this.request<QueueRow[]>("/queue");
  }

  getSequence(id: string): Promise<SequenceDoc> {
    return this.request<SequenceDoc>(`/sequence/${encodeURIComponent(id)}`);
  }

  postLabels(id: string, intervals: IntervalPayload[]): Promise<{ id: string; labels: number[][] }> {
    return this.request("/labels", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ id, intervals }),
    });
  }

  postRetrain(): Promise<{ job_id: string }> {
    return this.request("/retrain", { method: "POST" });
  }

  getStatus(jobId: string): Promise<RetrainStatus> {
    return this.request<RetrainStatus>(`/status/${encodeURIComponent(jobId)}`);
  }

  postClasses(classNames: string[]): Promise<{ class_names: string[] }> {
    return this.request("/classes", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ class_names: classNames }),
    });
  }

  async getExport(): Promise<ArrayBuffer> {
    const resp = await this.fetchImpl(this.base + "/export");
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return await resp.arrayBuffer();
  }
}
