// Shapes of the service's JSON payloads. The UI never recomputes any of
// these values; it renders them verbatim.

export type Confidence = "High" | "Medium" | "Low";

export interface ScoreDiagnostic {
  metric: string;
  reason: string;
}

export interface ResponseScores {
  s1: number;
  s2: number;
  s3: number;
  s4: number;
  s5: number;
  s6: number;
  sum: number;
  confidence: Confidence;
  diagnostics: ScoreDiagnostic[];
}

export interface IntentView {
  code: number;
  name: string;
}

export interface AskPayload {
  thread_id: string;
  question: string;
  corrected_question: string;
  answer: string;
  scores: ResponseScores;
  confidence: Confidence;
  source_chunk_ids: string[];
  intent: IntentView;
  classifier_fallback: boolean;
  relaxation_stage: number;
  inherited_dimensions: string[];
  provider: string;
  cost: number;
  latency_s: number;
}

export interface ChunkPayload {
  id: string;
  kind: string;
  text: string;
  metrics: string[];
  geos: string[];
  periods: string[];
  numbers: number[];
  source: string[];
}

export interface HealthPayload {
  status: string;
  store_size: number;
  provider: string;
}

/** A source row: either the fetched chunk or a placeholder for a miss. */
export type SourceRow =
  | { id: string; chunk: ChunkPayload }
  | { id: string; missing: true };
