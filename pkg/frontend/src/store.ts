import { ApiClient } from "./api.js";
import { TurnStream, type StreamState } from "./sse.js";
import type {
  MementoPayload,
  MetricReport,
  Suggestion,
  Turn,
} from "./types.js";

export interface PendingMessage {
  localId: number;
  text: string;
  failed: boolean;
}

export interface UiSessionState {
  personId: string | null;
  sessionId: string | null;
  status: "idle" | "active" | "closed";
  turns: Turn[]; // server truth, ordered by index, no gaps assumed
  pending: PendingMessage[]; // optimistic sends not yet acknowledged
  memento: MementoPayload | null;
  metrics: MetricReport | null;
  report: MetricReport | null;
  suggestions: Suggestion[];
  streamState: StreamState;
  notice: string | null;
}

type Listener = (state: UiSessionState) => void;

export type StreamFactory = (
  url: string,
  handlers: { onTurn: (turn: Turn) => void; onOpen: () => void; onStateChange: (s: StreamState) => void },
) => TurnStream;

/**
 * Client-side session state: mirrors the server transcript exactly, layering
 * optimistic sends on top until the server acknowledges them. All tag, slot
 * and metric values come from server payloads verbatim.
 */
export class SessionStore {
  private state: UiSessionState = SessionStore.initialState();
  private listeners: Listener[] = [];
  private stream: TurnStream | null = null;
  private nextLocalId = 1;

  constructor(
    private api: ApiClient,
    private streamFactory?: StreamFactory,
  ) {}

  static initialState(): UiSessionState {
    return {
      personId: null,
      sessionId: null,
      status: "idle",
      turns: [],
      pending: [],
      memento: null,
      metrics: null,
      report: null,
      suggestions: [],
      streamState: "idle",
      notice: null,
    };
  }

  getState(): UiSessionState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<UiSessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  // -- transcript bookkeeping ----------------------------------------------

  private lastIndex(): number {
    const turns = this.state.turns;
    return turns.length ? turns[turns.length - 1].index : -1;
  }

  /** Insert server turns by index (idempotent), retiring matching pending
   * user messages once the server shows them. */
  private absorbTurns(incoming: Turn[]): void {
    if (!incoming.length) return;
    const byIndex = new Map(this.state.turns.map((t) => [t.index, t]));
    for (const turn of incoming) byIndex.set(turn.index, turn);
    const turns = [...byIndex.values()].sort((a, b) => a.index - b.index);

    let pending = this.state.pending;
    for (const turn of incoming) {
      if (turn.initiator !== "user") continue;
      const match = pending.find((p) => p.text === turn.text);
      if (match) pending = pending.filter((p) => p.localId !== match.localId);
    }
    this.update({ turns, pending });
  }

  // -- lifecycle --------------------------------------------------------------

  async createSession(personId: string, mementoId?: string): Promise<void> {
    const payload = await this.api.createSession(personId, mementoId);
    this.update({
      personId,
      sessionId: payload.session_id,
      status: "active",
      turns: [],
      pending: [],
      report: null,
      notice: null,
    });
    this.absorbTurns(payload.turns);
    this.openStream();
  }

  private openStream(): void {
    const sessionId = this.state.sessionId;
    if (!sessionId) return;
    const url = this.api.url(`/api/sessions/${sessionId}/events`);
    const handlers = {
      onTurn: (turn: Turn) => this.absorbTurns([turn]),
      onOpen: () => {
        void this.backfill();
      },
      onStateChange: (streamState: StreamState) => this.update({ streamState }),
    };
    this.stream = this.streamFactory
      ? this.streamFactory(url, handlers)
      : new TurnStream(url, handlers);
    void this.stream.start();
  }

  /** Fetch any turns the stream missed (reconnects, subscribe races). */
  async backfill(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId) return;
    try {
      const payload = await this.api.getTurns(sessionId, this.lastIndex() + 1);
      this.absorbTurns(payload.turns);
    } catch {
      // transient; the next reconnect will retry
    }
  }

  async sendMessage(text: string): Promise<boolean> {
    const sessionId = this.state.sessionId;
    if (!sessionId || !text.trim() || this.state.status !== "active") return false;
    const local: PendingMessage = { localId: this.nextLocalId++, text, failed: false };
    this.update({ pending: [...this.state.pending, local] });
    try {
      const payload = await this.api.postMessage(sessionId, text);
      this.absorbTurns(payload.turns);
      this.update({ memento: payload.active_memento, metrics: payload.metrics });
      return true;
    } catch {
      this.update({
        pending: this.state.pending.map((p) =>
          p.localId === local.localId ? { ...p, failed: true } : p,
        ),
      });
      return false;
    }
  }

  async retryMessage(localId: number): Promise<boolean> {
    const entry = this.state.pending.find((p) => p.localId === localId);
    if (!entry) return false;
    this.update({ pending: this.state.pending.filter((p) => p.localId !== localId) });
    return this.sendMessage(entry.text);
  }

  async endSession(rating: number | null): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId) return;
    try {
      const payload = await this.api.endSession(sessionId, rating);
      this.update({ status: "closed", report: payload.report });
    } catch (error) {
      // double-close still ends with the final report on screen
      const fetched = await this.api.getMetrics(sessionId);
      this.update({ status: "closed", report: fetched.report, notice: String(error) });
    }
    this.stream?.stop();
    if (this.state.personId) {
      try {
        const payload = await this.api.getSuggestions(this.state.personId);
        this.update({ suggestions: payload.suggestions });
      } catch {
        this.update({ suggestions: [] });
      }
    }
  }

  async fetchReport(): Promise<MetricReport> {
    const sessionId = this.state.sessionId;
    if (!sessionId) throw new Error("no session");
    const payload = await this.api.getMetrics(sessionId);
    this.update({ report: payload.report });
    return payload.report;
  }

  async registerMemento(owner: string, uri: string, visibility: string, fixture?: string) {
    const payload = await this.api.registerMemento(owner, uri, visibility, fixture);
    this.update({
      notice: payload.adapter_unavailable ? "no features detected" : null,
    });
    return payload;
  }

  stop(): void {
    this.stream?.stop();
  }
}
