/* Typed client for the review service. Pure transport: every method mirrors
 * one endpoint, returns the body as-is, and does no reordering or scoring of
 * its own. All ranking lives on the server. */

export type AnnotationStatus = "none" | "confirmed" | "rejected";
export type RunStateName = "idle" | "running" | "done" | "error";

export interface Candidate {
  j: number;
  score: number;
  status: AnnotationStatus;
}

export interface CandidateList {
  revision: number;
  pair: [string, string];
  query: number;
  provenance: string;
  candidates: Candidate[];
}

export interface ManuscriptListing {
  revision: number;
  manuscripts: { id: string; illustrations: string[] }[];
}

export interface Annotation {
  revision: number;
  i: number;
  j: number;
  status: "confirmed" | "rejected";
}

export interface RunStatus {
  revision: number;
  state: RunStateName;
  executed: string[];
  error: string | null;
}

export interface RunAccepted {
  revision: number;
  state: RunStateName;
  pair: [string, string];
}

export interface MatchEntry {
  i: number;
  j: number;
  score: number;
  source: string;
  status: AnnotationStatus;
}

export interface MatchList {
  revision: number;
  pair: [string, string];
  entries: MatchEntry[];
}

/** Server answered with a non-2xx status. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** The request never reached the server (connection refused, DNS, timeout). */
export class OfflineError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${cause instanceof Error ? cause.message : String(cause)}`);
    this.name = "OfflineError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  private readonly base: string;

  constructor(
    baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, init);
    } catch (cause) {
      throw new OfflineError(cause);
    }
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        const body = JSON.parse(text);
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body, keep raw text */
      }
      throw new ApiError(response.status, detail);
    }
    return JSON.parse(text) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  manuscripts(): Promise<ManuscriptListing> {
    return this.request("/manuscripts");
  }

  candidates(a: string, b: string, i: number, k = 5, mask?: "rejected"): Promise<CandidateList> {
    const params = new URLSearchParams({ k: String(k) });
    if (mask !== undefined) params.set("mask", mask);
    return this.request(`/pairs/${encodeURIComponent(a)}/${encodeURIComponent(b)}/candidates/${i}?${params}`);
  }

  confirm(a: string, b: string, i: number, j: number): Promise<Annotation> {
    return this.post(`/pairs/${encodeURIComponent(a)}/${encodeURIComponent(b)}/confirm`, { i, j });
  }

  reject(a: string, b: string, i: number, j: number): Promise<Annotation> {
    return this.post(`/pairs/${encodeURIComponent(a)}/${encodeURIComponent(b)}/reject`, { i, j });
  }

  run(a: string, b: string, stages: string[]): Promise<RunAccepted> {
    return this.post(`/pairs/${encodeURIComponent(a)}/${encodeURIComponent(b)}/run`, { stages });
  }

  status(a: string, b: string): Promise<RunStatus> {
    return this.request(`/pairs/${encodeURIComponent(a)}/${encodeURIComponent(b)}/status`);
  }

  matches(a: string, b: string): Promise<MatchList> {
    return this.request(`/pairs/${encodeURIComponent(a)}/${encodeURIComponent(b)}/matches`);
  }

  imageUrl(illustrationId: string): string {
    return `${this.base}/images/${encodeURIComponent(illustrationId)}`;
  }
}
