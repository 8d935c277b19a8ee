// DOM wiring: the only module that touches document/window.

import { ApiClient } from "./api.js";
import { ChatStore } from "./state.js";
import { sourcesPanelHtml, turnHtml } from "./render.js";
import type { SourceRow } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function defaultBaseUrl(): string {
  const park = window.location;
  if (park.protocol.startsWith("http") && park.port !== "") {
    return `${park.protocol}//${park.host}`;
  }
  return "http://127.0.0.1:8080";
}

function boot(): void {
  const baseInput = el<HTMLInputElement>("base-url");
  const tokenInput = el<HTMLInputElement>("token");
  const log = el<HTMLDivElement>("chat-log");
  const form = el<HTMLFormElement>("ask-form");
  const questionInput = el<HTMLInputElement>("question");
  const sendButton = el<HTMLButtonElement>("send");
  const newThreadButton = el<HTMLButtonElement>("new-thread");
  const threadLabel = el<HTMLSpanElement>("thread-label");
  const healthLabel = el<HTMLSpanElement>("health");

  baseInput.value = defaultBaseUrl();
  let client = new ApiClient(baseInput.value, { token: tokenInput.value });
  let store = new ChatStore(client);

  const rebind = () => {
    client = new ApiClient(baseInput.value, { token: tokenInput.value });
    store = new ChatStore(client);
    store.onChange(renderAll);
    log.innerHTML = "";
    renderAll();
    void refreshHealth();
  };

  async function refreshHealth(): Promise<void> {
    try {
      const health = await client.health();
      healthLabel.textContent = `${health.status} — ${health.store_size} chunks via ${health.provider}`;
    } catch (err) {
      healthLabel.textContent = `unreachable (${err instanceof Error ? err.message : err})`;
    }
  }

  function renderAll(): void {
    sendButton.disabled = store.inFlight;
    questionInput.disabled = store.inFlight;
    threadLabel.textContent = store.threadId ? `thread ${store.threadId.slice(0, 8)}…` : "new thread";
    log.innerHTML = store.turns.map((turn, i) => turnHtml(turn, i)).join("");
    log.scrollTop = log.scrollHeight;
    bindTurnButtons();
  }

  function bindTurnButtons(): void {
    log.querySelectorAll<HTMLButtonElement>(".retry").forEach((button) => {
      button.addEventListener("click", () => {
        void store.send(button.dataset.question ?? "");
      });
    });
    log.querySelectorAll<HTMLButtonElement>(".sources-toggle").forEach((button) => {
      button.addEventListener("click", () => {
        void showSources(Number(button.dataset.turn));
      });
    });
  }

  async function showSources(index: number): Promise<void> {
    const turn = store.turns[index];
    const panel = log.querySelector<HTMLDivElement>(`[data-sources="${index}"]`);
    if (!turn || turn.kind !== "answer" || !panel) {
      return;
    }
    const rows: SourceRow[] = await Promise.all(
      turn.payload.source_chunk_ids.map(async (id): Promise<SourceRow> => {
        try {
          return { id, chunk: await client.chunk(id) };
        } catch {
          return { id, missing: true };
        }
      }),
    );
    panel.innerHTML = sourcesPanelHtml(rows, turn.payload.answer);
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const question = questionInput.value.trim();
    if (!question) {
      return;
    }
    questionInput.value = "";
    void store.send(question);
  });
  newThreadButton.addEventListener("click", () => store.newThread());
  baseInput.addEventListener("change", rebind);
  tokenInput.addEventListener("change", rebind);

  store.onChange(renderAll);
  renderAll();
  void refreshHealth();
}

boot();
