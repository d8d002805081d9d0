/** Typed client for the collection service HTTP API.
 *
 * Endpoints:
 *   GET  /goals
 *   POST /sessions                   {goal_id, annotator_id}
 *   GET  /sessions/{id}
 *   POST /sessions/{id}/message      {text} -> {reply}
 *   POST /sessions/{id}/complete     {outcome}
 *
 * Errors arrive as {kind, detail} bodies and surface as ServiceError.
 */

export type Speaker = "user" | "system";
export type SessionState = "Open" | "Completed" | "Abandoned";
export type Outcome = "Completed" | "Abandoned";

export interface Message {
  speaker: Speaker;
  text: string;
}

export interface SessionView {
  session_id: string;
  goal_id: string;
  nl_goal: string;
  complexity_instructions: string[];
  annotator_id: string;
  state: SessionState;
  turns: Message[];
}

export interface GoalSummary {
  goal_id: string;
  nl_goal: string;
  domains: string[];
  intents: number;
}

export interface CompletionReceipt {
  transcript_ref: string;
  state: SessionState;
  turn_count: number;
}

export class ServiceError extends Error {
  constructor(
    public readonly kind: string,
    public readonly detail: string,
    public readonly status: number,
  ) {
    super(`${kind}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  private readonly base: string;

  constructor(
    baseUrl: string,
    private readonly authToken?: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  listGoals(): Promise<GoalSummary[]> {
    return this.request("GET", "/goals");
  }

  createSession(goalId: string, annotatorId: string): Promise<SessionView> {
    return this.request("POST", "/sessions", {
      goal_id: goalId,
      annotator_id: annotatorId,
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  sendMessage(sessionId: string, text: string): Promise<{ reply: string }> {
    return this.request("POST", `/sessions/${sessionId}/message`, { text });
  }

  completeSession(sessionId: string, outcome: Outcome): Promise<CompletionReceipt> {
    return this.request("POST", `/sessions/${sessionId}/complete`, { outcome });
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.authToken) {
      headers["x-auth-token"] = this.authToken;
    }
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceError("Unreachable", String(err), 0);
    }
    if (!response.ok) {
      let kind = "ServiceError";
      let detail = `request failed with status ${response.status}`;
      try {
        const payload = (await response.json()) as { kind?: string; detail?: string };
        if (payload.kind) kind = payload.kind;
        if (payload.detail) detail = payload.detail;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ServiceError(kind, detail, response.status);
    }
    return (await response.json()) as T;
  }
}
