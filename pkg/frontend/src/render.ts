// Pure HTML renderers. Everything here is a string-in/string-out function
// so the view layer is testable without a browser; main.ts owns the DOM.

import { escapeHtml, extractNumbers, highlightSharedNumbers } from "./highlight.js";
import type { AskPayload, Confidence, SourceRow } from "./types.js";
import type { TurnView } from "./state.js";

export const CAUTION_NOTE = "Low confidence - assert caution while making key decisions.";

const BADGE_CLASS: Record<Confidence, string> = {
  High: "badge-high",
  Medium: "badge-medium",
  Low: "badge-low",
};

/** Badge label is the API's confidence string, verbatim. */
export function badgeHtml(confidence: Confidence): string {
  const cls = BADGE_CLASS[confidence] ?? "badge-low";
  return `<span class="badge ${cls}">${escapeHtml(confidence)}</span>`;
}

export function answerHtml(answer: string): string {
  const lines = answer.split("\n").filter((line) => line.trim().length > 0);
  const bullets = lines.filter((line) => line.trimStart().startsWith("- "));
  if (bullets.length === 0) {
    return `<p>${lines.map(escapeHtml).join("<br>")}</p>`;
  }
  const items = lines.map((line) => {
    const body = line.trimStart().startsWith("- ")
      ? line.trimStart().slice(2)
      : line;
    return `<li>${escapeHtml(body)}</li>`;
  });
  return `<ul class="answer-bullets">${items.join("")}</ul>`;
}

const FLAG_LABELS: Record<string, string> = {
  s1: "addresses the question's entities",
  s2: "numbers grounded in context",
  s3: "no verbatim prompt copying",
  s4: "signs agree with wording",
  s5: "context free of foreign metrics",
  s6: "numeric sentences context-backed",
};

export function scorePanelHtml(payload: AskPayload): string {
  const scores = payload.scores;
  const reasons = new Map(scores.diagnostics.map((d) => [d.metric, d.reason]));
  const rows = (["s1", "s2", "s3", "s4", "s5", "s6"] as const).map((flag) => {
    const value = scores[flag];
    const reason = reasons.get(flag);
    const note = reason ? ` <span class="flag-reason">${escapeHtml(reason)}</span>` : "";
    return (
      `<li class="${value ? "flag-pass" : "flag-fail"}">` +
      `${value ? "&#10003;" : "&#10007;"} <code>${flag}</code> ` +
      `${escapeHtml(FLAG_LABELS[flag])}${note}</li>`
    );
  });
  const open = payload.confidence === "High" ? "" : " open";
  const caution =
    payload.confidence === "Low"
      ? `<p class="caution-note">${escapeHtml(CAUTION_NOTE)}</p>`
      : "";
  return (
    `<details class="score-panel"${open}>` +
    `<summary>score ${scores.sum}/6</summary>` +
    caution +
    `<ul class="score-flags">${rows.join("")}</ul>` +
    `</details>`
  );
}

export function turnHtml(turn: TurnView, index: number): string {
  if (turn.kind === "error") {
    return errorHtml(turn.question, turn.message, turn.status);
  }
  const payload = turn.payload;
  const meta: string[] = [
    `intent: ${escapeHtml(payload.intent.name)}`,
    `stage: ${payload.relaxation_stage}`,
    `latency: ${(payload.latency_s * 1000).toFixed(0)} ms`,
  ];
  if (payload.inherited_dimensions.length > 0) {
    meta.push(`inherited: ${payload.inherited_dimensions.map(escapeHtml).join(", ")}`);
  }
  return (
    `<div class="turn" data-turn="${index}">` +
    `<div class="bubble question">${escapeHtml(payload.question)}</div>` +
    `<div class="bubble answer">` +
    `<div class="answer-head">${badgeHtml(payload.confidence)}` +
    `<span class="meta">${meta.join(" &middot; ")}</span></div>` +
    answerHtml(payload.answer) +
    scorePanelHtml(payload) +
    `<button class="sources-toggle" data-turn="${index}">` +
    `sources (${payload.source_chunk_ids.length})</button>` +
    `<div class="sources" data-sources="${index}"></div>` +
    `</div></div>`
  );
}

export function errorHtml(question: string, message: string, status: number): string {
  const label = status > 0 ? `service error ${status}` : "network error";
  return (
    `<div class="turn">` +
    `<div class="bubble question">${escapeHtml(question)}</div>` +
    `<div class="bubble error-bubble">` +
    `<strong>${escapeHtml(label)}</strong> ${escapeHtml(message)} ` +
    `<button class="retry" data-question="${escapeHtml(question)}">retry</button>` +
    `</div></div>`
  );
}

/** Source rows in rank order; fetch misses render as placeholder rows. */
export function sourcesPanelHtml(rows: SourceRow[], answerText: string): string {
  if (rows.length === 0) {
    return `<div class="sources-empty">no sources for this turn</div>`;
  }
  const answerNumbers = extractNumbers(answerText);
  const items = rows.map((row) => {
    if ("missing" in row) {
      return (
        `<li class="source-row source-missing">` +
        `<code>${escapeHtml(row.id)}</code> (chunk unavailable)</li>`
      );
    }
    return (
      `<li class="source-row">` +
      `<code>${escapeHtml(row.id)}</code> <em>${escapeHtml(row.chunk.kind)}</em>` +
      `<p>${highlightSharedNumbers(row.chunk.text, answerNumbers)}</p></li>`
    );
  });
  return `<ol class="source-list">${items.join("")}</ol>`;
}
