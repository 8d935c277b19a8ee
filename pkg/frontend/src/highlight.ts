// Display-only number matching for the source panel: numbers that appear
// in the answer get wrapped in <mark> inside the chunk text. All scoring
// stays on the server; this is purely visual.

const FISCAL_TOKEN = /\bFY\s?-?\d{2,4}(\s*-\s*Q[1-4])?\b|\bQ[1-4]\b/gi;
const NUMBER = /[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?/g;

export function extractNumbers(text: string): number[] {
  const masked = text.replace(FISCAL_TOKEN, (m) => " ".repeat(m.length));
  const out: number[] = [];
  for (const match of masked.matchAll(NUMBER)) {
    const index = match.index ?? 0;
    const before = masked[index - 1] ?? " ";
    if (/[\w.,]/.test(before)) {
      continue;
    }
    out.push(parseFloat(match[0].replace(/,/g, "")));
  }
  return out;
}

function closeEnough(a: number, b: number): boolean {
  return Math.abs(a - b) <= 1e-9;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Escape the chunk text and wrap every number shared with the answer in <mark>. */
export function highlightSharedNumbers(chunkText: string, answerNumbers: number[]): string {
  const masked = chunkText.replace(FISCAL_TOKEN, (m) => " ".repeat(m.length));
  const pieces: string[] = [];
  let cursor = 0;
  for (const match of masked.matchAll(NUMBER)) {
    const index = match.index ?? 0;
    const before = masked[index - 1] ?? " ";
    if (/[\w.,]/.test(before)) {
      continue;
    }
    const value = parseFloat(match[0].replace(/,/g, ""));
    if (!answerNumbers.some((n) => closeEnough(n, value))) {
      continue;
    }
    pieces.push(escapeHtml(chunkText.slice(cursor, index)));
    pieces.push(`<mark>${escapeHtml(chunkText.slice(index, index + match[0].length))}</mark>`);
    cursor = index + match[0].length;
  }
  pieces.push(escapeHtml(chunkText.slice(cursor)));
  return pieces.join("");
}
