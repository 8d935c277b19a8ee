// Thin typed client for the service API. The fetch implementation is
// injectable so tests can run without a network or a browser.

import type { AskPayload, ChunkPayload, HealthPayload } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail || `request failed with status ${status}`);
    this.status = status;
  }
}

export interface ApiClientOptions {
  fetchFn?: FetchLike;
  token?: string;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;
  token: string;

  constructor(baseUrl: string, options: ApiClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = options.fetchFn ?? ((input, init) => fetch(input, init));
    this.token = options.token ?? "";
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.token) {
      headers["authorization"] = `Bearer ${this.token}`;
    }
    return headers;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, {
        ...init,
        headers: { ...this.headers(), ...(init?.headers ?? {}) },
      });
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = "";
      try {
        const body = (await response.json()) as { detail?: string };
        detail = body.detail ?? "";
      } catch {
        detail = "";
      }
      throw new ApiError(response.status, detail || response.statusText);
    }
    return (await response.json()) as T;
  }

  ask(question: string, threadId: string | null): Promise<AskPayload> {
    const body: Record<string, unknown> = { question };
    if (threadId) {
      body.thread_id = threadId;
    }
    return this.request<AskPayload>("/v1/ask", {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  chunk(id: string): Promise<ChunkPayload> {
    return this.request<ChunkPayload>(`/v1/chunks/${encodeURIComponent(id)}`);
  }

  health(): Promise<HealthPayload> {
    return this.request<HealthPayload>("/v1/health");
  }

  metrics(): Promise<Record<string, unknown>> {
    return this.request<Record<string, unknown>>("/v1/metrics");
  }
}
