import type {
  AllocationBody,
  ExplanationPayload,
  FairnessPayload,
  FeedbackPayload,
  FrontPayload,
  JobStatus,
  OverrideAck,
  OverrideBody,
  SelectionPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(detail);
  }
}

// The service puts its human-readable message in `detail`; keep it verbatim.
export function detailOf(data: unknown, status: number): string {
  if (data !== null && typeof data === "object" && "detail" in data) {
    const d = (data as { detail: unknown }).detail;
    return typeof d === "string" ? d : JSON.stringify(d);
  }
  return `request failed with status ${status}`;
}

export interface Http {
  request(method: string, path: string, body?: unknown): Promise<unknown>;
}

export class FetchHttp implements Http {
  constructor(private readonly base: string = "") {}

  async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const res = await fetch(this.base + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    const data: unknown = text === "" ? null : JSON.parse(text);
    if (!res.ok) {
      throw new ApiError(res.status, detailOf(data, res.status));
    }
    return data;
  }
}

const wait = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ApiClient {
  constructor(
    private readonly http: Http,
    private readonly sleep: (ms: number) => Promise<void> = wait,
  ) {}

  generateDataset(datasetId: string, spec: Record<string, unknown>) {
    return this.http.request("POST", `/datasets/${datasetId}/generate`, spec) as Promise<{
      dataset_id: string;
    }>;
  }

  submitAllocation(body: AllocationBody) {
    return this.http.request("POST", "/allocations", body) as Promise<{ job_id: string }>;
  }

  jobStatus(jobId: string) {
    return this.http.request("GET", `/allocations/${jobId}`) as Promise<JobStatus>;
  }

  // Poll with capped exponential backoff until the job leaves the queue.
  async pollJob(jobId: string): Promise<JobStatus> {
    for (let attempt = 0; ; attempt++) {
      const doc = await this.jobStatus(jobId);
      if (doc.status === "done") return doc;
      if (doc.status === "failed") {
        throw new ApiError(500, doc.error ?? "optimization job failed");
      }
      await this.sleep(Math.min(250 * 2 ** attempt, 2000));
    }
  }

  front(jobId: string) {
    return this.http.request("GET", `/allocations/${jobId}/front`) as Promise<FrontPayload>;
  }

  select(jobId: string, weights: [number, number, number], mandatory: string[] = []) {
    return this.http.request("POST", `/allocations/${jobId}/select`, {
      weights,
      mandatory,
    }) as Promise<SelectionPayload>;
  }

  selection(jobId: string) {
    return this.http.request(
      "GET",
      `/allocations/${jobId}/selection`,
    ) as Promise<SelectionPayload>;
  }

  override(jobId: string, body: OverrideBody) {
    return this.http.request(
      "POST",
      `/allocations/${jobId}/overrides`,
      body,
    ) as Promise<OverrideAck>;
  }

  fairness(jobId: string) {
    return this.http.request(
      "GET",
      `/allocations/${jobId}/fairness-report`,
    ) as Promise<FairnessPayload>;
  }

  explanation(jobId: string, candidateId: string, roleId: string) {
    return this.http.request(
      "GET",
      `/allocations/${jobId}/explanations/${candidateId}/${roleId}`,
    ) as Promise<ExplanationPayload>;
  }

  sendFeedback(weights: [number, number, number], eta?: number) {
    return this.http.request("POST", "/feedback/weights", {
      weights,
      ...(eta === undefined ? {} : { eta }),
    }) as Promise<FeedbackPayload>;
  }

  currentWeights() {
    return this.http.request("GET", "/feedback/weights") as Promise<FeedbackPayload>;
  }
}
