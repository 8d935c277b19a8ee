// Conversation state: one in-flight question at a time, extra sends are
// queued rather than interleaved, and consecutive sends reuse the same
// thread id until the user explicitly starts a new thread.

import { ApiClient, ApiError } from "./api.js";
import type { AskPayload } from "./types.js";

export type TurnView =
  | { kind: "answer"; payload: AskPayload }
  | { kind: "error"; question: string; message: string; status: number };

export type ChangeListener = (store: ChatStore) => void;

export class ChatStore {
  readonly turns: TurnView[] = [];
  threadId: string | null = null;
  inFlight = false;

  private readonly client: ApiClient;
  private readonly queue: Array<{ question: string; settle: () => void }> = [];
  private readonly listeners: ChangeListener[] = [];

  constructor(client: ApiClient) {
    this.client = client;
  }

  onChange(listener: ChangeListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener(this);
    }
  }

  /** Forget the thread; the next send starts a fresh conversation. */
  newThread(): void {
    this.threadId = null;
    this.notify();
  }

  /** Queue a question; resolves once this particular question settled. */
  send(question: string): Promise<void> {
    const settled = new Promise<void>((resolve) => {
      this.queue.push({ question, settle: resolve });
    });
    this.notify();
    if (!this.inFlight) {
      void this.drain();
    }
    return settled;
  }

  private async drain(): Promise<void> {
    this.inFlight = true;
    this.notify();
    try {
      while (this.queue.length > 0) {
        const item = this.queue.shift()!;
        await this.sendOne(item.question);
        item.settle();
      }
    } finally {
      this.inFlight = false;
      this.notify();
    }
  }

  private async sendOne(question: string): Promise<void> {
    try {
      const payload = await this.client.ask(question, this.threadId);
      this.threadId = payload.thread_id;
      this.turns.push({ kind: "answer", payload });
    } catch (err) {
      const status = err instanceof ApiError ? err.status : 0;
      const message = err instanceof Error ? err.message : String(err);
      this.turns.push({ kind: "error", question, message, status });
    }
    this.notify();
  }
}
