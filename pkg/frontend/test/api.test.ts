import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { makePayload } from "./fixtures.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("posts the question and optional thread id to /v1/ask", async () => {
    let captured: { url: string; init?: RequestInit } | null = null;
    const client = new ApiClient("http://svc.test/", {
      fetchFn: async (url, init) => {
        captured = { url, init };
        return jsonResponse(makePayload("High"));
      },
    });
    const payload = await client.ask("What is up?", "t-7");
    expect(payload.confidence).toBe("High");
    expect(captured!.url).toBe("http://svc.test/v1/ask");
    const body = JSON.parse(String(captured!.init?.body));
    expect(body).toEqual({ question: "What is up?", thread_id: "t-7" });
  });

  it("sends a bearer token when configured", async () => {
    let headers: Record<string, string> = {};
    const client = new ApiClient("http://svc.test", {
      token: "sesame",
      fetchFn: async (url, init) => {
        headers = (init?.headers ?? {}) as Record<string, string>;
        return jsonResponse(makePayload("High"));
      },
    });
    await client.ask("q", null);
    expect(headers["authorization"]).toBe("Bearer sesame");
  });

  it("raises ApiError with the service detail on non-2xx", async () => {
    const client = new ApiClient("http://svc.test", {
      fetchFn: async () => jsonResponse({ detail: "ingest a table before asking" }, 503),
    });
    await expect(client.ask("q", null)).rejects.toMatchObject({
      status: 503,
      message: "ingest a table before asking",
    });
  });

  it("wraps network failures in a status-0 ApiError", async () => {
    const client = new ApiClient("http://svc.test", {
      fetchFn: async () => {
        throw new TypeError("fetch failed");
      },
    });
    const err = await client.ask("q", null).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(0);
  });

  it("URL-encodes chunk ids", async () => {
    let captured = "";
    const client = new ApiClient("http://svc.test", {
      fetchFn: async (url) => {
        captured = url;
        return jsonResponse({
          id: "a b", kind: "primary", text: "t. t.", metrics: [], geos: [],
          periods: [], numbers: [], source: [],
        });
      },
    });
    await client.chunk("a b");
    expect(captured).toBe("http://svc.test/v1/chunks/a%20b");
  });
});
