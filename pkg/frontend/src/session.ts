/** Chat session state machine, kept free of DOM concerns so it is testable.
 *
 * The server is the single source of truth: after every round-trip the
 * message list is re-synced from GET /sessions/{id}, so the UI view always
 * equals the server session. A failed send keeps the typed text in
 * pendingInput for resend and leaves the server state untouched.
 */

import {
  CompletionReceipt,
  Message,
  Outcome,
  ServiceClient,
  ServiceError,
  SessionView,
} from "./api.js";

export type Phase = "picking" | "open" | "busy" | "finished";

export interface ChatState {
  phase: Phase;
  view: SessionView | null;
  messages: Message[];
  pendingInput: string;
  error: string | null;
  receipt: CompletionReceipt | null;
}

export class ChatSession {
  private phase: Phase = "picking";
  private view: SessionView | null = null;
  private pendingInput = "";
  private error: string | null = null;
  private receipt: CompletionReceipt | null = null;
  private finishing = false;

  constructor(
    private readonly client: ServiceClient,
    private readonly onChange: (state: ChatState) => void = () => {},
  ) {}

  state(): ChatState {
    return {
      phase: this.phase,
      view: this.view,
      messages: this.view ? [...this.view.turns] : [],
      pendingInput: this.pendingInput,
      error: this.error,
      receipt: this.receipt,
    };
  }

  canSend(): boolean {
    return this.phase === "open";
  }

  async start(goalId: string, annotatorId: string): Promise<void> {
    this.error = null;
    this.receipt = null;
    try {
      this.view = await this.client.createSession(goalId, annotatorId);
      this.phase = "open";
    } catch (err) {
      // no session was created; stay on the goal picker with a visible error
      this.view = null;
      this.phase = "picking";
      this.error = describe(err);
    }
    this.emit();
  }

  async send(text: string): Promise<void> {
    if (!this.view || this.phase !== "open" || !text.trim()) {
      return;
    }
    this.phase = "busy";
    this.pendingInput = text;
    this.error = null;
    this.emit();
    try {
      await this.client.sendMessage(this.view.session_id, text);
      await this.refresh();
      this.pendingInput = "";
      this.phase = "open";
    } catch (err) {
      // keep the typed message for resend; server state is unchanged
      this.error = describe(err);
      this.phase = "open";
    }
    this.emit();
  }

  async finish(outcome: Outcome): Promise<void> {
    if (!this.view || this.finishing || this.phase === "finished") {
      return;
    }
    this.finishing = true;
    this.error = null;
    try {
      this.receipt = await this.client.completeSession(this.view.session_id, outcome);
      await this.refresh();
      this.phase = "finished";
    } catch (err) {
      this.error = describe(err);
      if (err instanceof ServiceError && (err.kind === "SessionClosed" || err.status === 404)) {
        // stale session (server restarted or already closed); back to the picker
        this.phase = "finished";
      }
    } finally {
      this.finishing = false;
    }
    this.emit();
  }

  async refresh(): Promise<void> {
    if (!this.view) {
      return;
    }
    this.view = await this.client.getSession(this.view.session_id);
  }

  reset(): void {
    this.phase = "picking";
    this.view = null;
    this.pendingInput = "";
    this.error = null;
    this.receipt = null;
    this.emit();
  }

  private emit(): void {
    this.onChange(this.state());
  }
}

function describe(err: unknown): string {
  if (err instanceof ServiceError) {
    return `${err.kind}: ${err.detail}`;
  }
  return String(err);
}
