// UI conformance gate: badge mapping, thread reuse, and the Low-confidence
// caution note, on fixture payloads for all three confidence labels.

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatStore } from "../src/state.js";
import { CAUTION_NOTE, badgeHtml, scorePanelHtml, turnHtml } from "../src/render.js";
import type { Confidence } from "../src/types.js";
import { makePayload } from "./fixtures.js";

const BADGE_CLASSES: Record<Confidence, string> = {
  High: "badge-high",
  Medium: "badge-medium",
  Low: "badge-low",
};

describe("UI conformance", () => {
  it("badge text and color class match the API confidence verbatim", () => {
    for (const confidence of ["High", "Medium", "Low"] as const) {
      const payload = makePayload(confidence);
      const badge = badgeHtml(payload.confidence);
      expect(badge).toContain(BADGE_CLASSES[confidence]);
      expect(badge).toContain(`>${confidence}<`);
      expect(turnHtml({ kind: "answer", payload }, 0)).toContain(BADGE_CLASSES[confidence]);
    }
  });

  it("follow-up messages reuse the thread id", async () => {
    const bodies: Array<Record<string, unknown>> = [];
    const client = new ApiClient("http://svc.test", {
      fetchFn: async (url, init) => {
        bodies.push(JSON.parse(String(init?.body)) as Record<string, unknown>);
        return new Response(
          JSON.stringify(makePayload("High", { thread_id: "t-accept" })),
          { status: 200, headers: { "content-type": "application/json" } },
        );
      },
    });
    const store = new ChatStore(client);
    await store.send("first?");
    await store.send("second?");
    await store.send("third?");
    expect(bodies[0].thread_id).toBeUndefined();
    expect(bodies[1].thread_id).toBe("t-accept");
    expect(bodies[2].thread_id).toBe("t-accept");
  });

  it("a Low-confidence payload renders the caution note, auto-expanded", () => {
    const html = scorePanelHtml(makePayload("Low"));
    expect(html).toContain(CAUTION_NOTE);
    expect(html).toContain(" open");
    expect(scorePanelHtml(makePayload("High"))).not.toContain(CAUTION_NOTE);
  });
});
