import type { AskPayload, Confidence, ResponseScores } from "../src/types.js";

export function makeScores(confidence: Confidence): ResponseScores {
  const byLabel: Record<Confidence, [number, number, number, number, number, number]> = {
    High: [1, 1, 1, 1, 0, 1],
    Medium: [1, 0, 1, 1, 0, 1],
    Low: [0, 0, 1, 1, 0, 0],
  };
  const [s1, s2, s3, s4, s5, s6] = byLabel[confidence];
  const sum = s1 + s2 + s3 + s4 + s5 + s6;
  const diagnostics = [];
  if (!s1) diagnostics.push({ metric: "s1", reason: "response does not address: Germany" });
  if (!s2) diagnostics.push({ metric: "s2", reason: "numbers absent from context: 9.99" });
  if (!s5) diagnostics.push({ metric: "s5", reason: "context includes metrics beyond the query: CPI" });
  if (!s6) diagnostics.push({ metric: "s6", reason: "a numeric sentence cites entities its context sentence does not back" });
  return { s1, s2, s3, s4, s5, s6, sum, confidence, diagnostics };
}

export function makePayload(
  confidence: Confidence,
  overrides: Partial<AskPayload> = {},
): AskPayload {
  return {
    thread_id: "thread-1",
    question: "What is the GDP in Germany in FY23-Q1?",
    corrected_question: "What is the GDP in Germany in FY23-Q1?",
    answer: "- was 3.50% in FY23-Q1 The GDP for Germany.\n- figures above are for Germany The following.",
    scores: makeScores(confidence),
    confidence,
    source_chunk_ids: ["primary:germany:fy23_q1:1", "feature:gdp:fy23_q1"],
    intent: { code: 0, name: "BasicInfo" },
    classifier_fallback: false,
    relaxation_stage: 0,
    inherited_dimensions: [],
    provider: "mock-faithful",
    cost: 0,
    latency_s: 0.0123,
    ...overrides,
  };
}
