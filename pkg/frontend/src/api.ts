import type {
  CreateSessionPayload,
  Envelope,
  MessagePayload,
  MetricReport,
  RegisterMementoPayload,
  Suggestion,
  Turn,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

/** Thin typed client over the documented endpoints; no business logic. */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
    private apiToken: string | null = null,
  ) {}

  url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.apiToken) headers["x-api-token"] = this.apiToken;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const reply = await this.fetchImpl(this.url(path), {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const envelope = (await reply.json()) as Envelope<T>;
    if (envelope.error) {
      throw new ApiError(envelope.error.code, envelope.error.message, reply.status);
    }
    if (envelope.payload === null) {
      throw new ApiError("empty-payload", "envelope carried neither payload nor error", reply.status);
    }
    return envelope.payload;
  }

  createSession(personId: string, mementoId?: string): Promise<CreateSessionPayload> {
    return this.request("POST", "/api/sessions", {
      person_id: personId,
      memento_id: mementoId ?? null,
    });
  }

  postMessage(sessionId: string, text: string): Promise<MessagePayload> {
    return this.request("POST", `/api/sessions/${sessionId}/messages`, { text });
  }

  endSession(sessionId: string, rating: number | null): Promise<{ report: MetricReport }> {
    return this.request("POST", `/api/sessions/${sessionId}/end`, { rating });
  }

  getMetrics(sessionId: string): Promise<{ report: MetricReport }> {
    return this.request("GET", `/api/sessions/${sessionId}/metrics`);
  }

  getTurns(sessionId: string, since: number): Promise<{ turns: Turn[]; status: string }> {
    return this.request("GET", `/api/sessions/${sessionId}/turns?since=${since}`);
  }

  getSuggestions(personId: string): Promise<{ suggestions: Suggestion[] }> {
    return this.request("GET", `/api/people/${personId}/suggestions`);
  }

  registerMemento(
    owner: string,
    uri: string,
    visibility: string,
    featureFixture?: string,
  ): Promise<RegisterMementoPayload> {
    return this.request("POST", "/api/mementos", {
      owner,
      media_kind: "picture",
      uri,
      visibility,
      feature_fixture: featureFixture ?? null,
    });
  }
}
