import { describe, expect, it } from "vitest";

import {
  CAUTION_NOTE, answerHtml, badgeHtml, errorHtml, scorePanelHtml,
  sourcesPanelHtml, turnHtml,
} from "../src/render.js";
import type { ChunkPayload } from "../src/types.js";
import { makePayload } from "./fixtures.js";

describe("badge", () => {
  it("maps High to the green class with the verbatim label", () => {
    const html = badgeHtml("High");
    expect(html).toContain("badge-high");
    expect(html).toContain(">High<");
  });

  it("maps Medium to amber and Low to red, labels verbatim", () => {
    expect(badgeHtml("Medium")).toContain("badge-medium");
    expect(badgeHtml("Medium")).toContain(">Medium<");
    expect(badgeHtml("Low")).toContain("badge-low");
    expect(badgeHtml("Low")).toContain(">Low<");
  });
});

describe("score panel", () => {
  it("collapses for High-confidence payloads", () => {
    const html = scorePanelHtml(makePayload("High"));
    expect(html).toContain("<details");
    expect(html).not.toContain("<details class=\"score-panel\" open");
    expect(html).not.toContain(CAUTION_NOTE);
  });

  it("auto-expands with the caution note for Low-confidence payloads", () => {
    const html = scorePanelHtml(makePayload("Low"));
    expect(html).toContain("<details class=\"score-panel\" open");
    expect(html).toContain(CAUTION_NOTE);
  });

  it("renders one row per flag with diagnostics on failures", () => {
    const html = scorePanelHtml(makePayload("Medium"));
    for (const flag of ["s1", "s2", "s3", "s4", "s5", "s6"]) {
      expect(html).toContain(`<code>${flag}</code>`);
    }
    expect(html).toContain("numbers absent from context: 9.99");
  });
});

describe("turn rendering", () => {
  it("shows the badge, bullets and source count", () => {
    const html = turnHtml({ kind: "answer", payload: makePayload("High") }, 0);
    expect(html).toContain("badge-high");
    expect(html).toContain("<ul class=\"answer-bullets\">");
    expect(html).toContain("sources (2)");
    expect(html).toContain("intent: BasicInfo");
  });

  it("renders errors as error bubbles with a retry button, never as answers", () => {
    const html = errorHtml("what is up?", "store empty", 503);
    expect(html).toContain("error-bubble");
    expect(html).toContain("service error 503");
    expect(html).toContain("data-question=\"what is up?\"");
    expect(html).not.toContain("answer-bullets");
  });

  it("escapes markup in questions and answers", () => {
    const payload = makePayload("High", {
      question: "<script>alert(1)</script>",
      answer: "- value is <b>bold</b>.",
    });
    const html = turnHtml({ kind: "answer", payload }, 0);
    expect(html).not.toContain("<script>alert(1)</script>");
    expect(html).toContain("&lt;script&gt;");
    expect(html).toContain("&lt;b&gt;bold&lt;/b&gt;");
  });
});

describe("sources panel", () => {
  const chunk: ChunkPayload = {
    id: "primary:germany:fy23_q1:1",
    kind: "primary",
    text: "The following figures are for Germany in FY23-Q1. The GDP for Germany in FY23-Q1 was 3.50%.",
    metrics: ["GDP"],
    geos: ["Germany"],
    periods: ["FY23-Q1"],
    numbers: [3.5],
    source: ["GDP|Germany|FY23-Q1"],
  };

  it("highlights numbers that appear in the answer", () => {
    const html = sourcesPanelHtml(
      [{ id: chunk.id, chunk }],
      "- was 3.50% in FY23-Q1 The GDP for Germany.",
    );
    expect(html).toContain("<mark>3.50</mark>");
    expect(html).not.toContain("<mark>FY23");
  });

  it("renders placeholder rows for missing chunks, keeping rank order", () => {
    const html = sourcesPanelHtml(
      [{ id: "gone:1", missing: true }, { id: chunk.id, chunk }],
      "- nothing numeric.",
    );
    expect(html).toContain("chunk unavailable");
    expect(html.indexOf("gone:1")).toBeLessThan(html.indexOf(chunk.id));
  });

  it("renders an empty panel for zero sources", () => {
    expect(sourcesPanelHtml([], "- anything.")).toContain("no sources");
  });
});
