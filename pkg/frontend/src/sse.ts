import type { FetchLike } from "./api.js";
import type { Turn } from "./types.js";

export type StreamState = "idle" | "connecting" | "open" | "reconnecting" | "stopped";

export interface TurnStreamHandlers {
  onTurn: (turn: Turn) => void;
  /** Fired once per (re)connect, before events flow; backfill point. */
  onOpen?: () => void;
  onStateChange?: (state: StreamState) => void;
}

const RETRY_BASE_MS = 250;
const RETRY_CAP_MS = 4000;

/**
 * Server-sent-events consumer built on fetch streaming, so it runs both in
 * browsers and under Node test runners (which lack a native EventSource).
 * Reconnects with backoff after drops; the owner backfills missed turns via
 * the turns endpoint from onOpen.
 */
export class TurnStream {
  private controller: AbortController | null = null;
  private stopped = false;
  private attempt = 0;
  state: StreamState = "idle";

  constructor(
    private url: string,
    private handlers: TurnStreamHandlers,
    private fetchImpl: FetchLike = (u, init) => fetch(u, init),
    private sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  ) {}

  private setState(state: StreamState): void {
    this.state = state;
    this.handlers.onStateChange?.(state);
  }

  start(): Promise<void> {
    this.stopped = false;
    return this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.setState("stopped");
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      this.setState(this.attempt === 0 ? "connecting" : "reconnecting");
      try {
        await this.consumeOnce();
      } catch {
        // fall through to retry
      }
      if (this.stopped) return;
      this.attempt += 1;
      const delay = Math.min(RETRY_BASE_MS * 2 ** (this.attempt - 1), RETRY_CAP_MS);
      await this.sleep(delay);
    }
  }

  private async consumeOnce(): Promise<void> {
    this.controller = new AbortController();
    const reply = await this.fetchImpl(this.url, {
      signal: this.controller.signal,
      headers: { accept: "text/event-stream" },
    });
    if (!reply.ok || !reply.body) throw new Error(`stream failed: ${reply.status}`);

    this.setState("open");
    this.handlers.onOpen?.();

    const reader = reply.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let boundary;
      while ((boundary = buffer.indexOf("\n\n")) >= 0) {
        const frame = buffer.slice(0, boundary);
        buffer = buffer.slice(boundary + 2);
        this.handleFrame(frame);
      }
    }
    throw new Error("stream ended");
  }

  private handleFrame(frame: string): void {
    if (!frame || frame.startsWith(":")) return;
    let event = "message";
    const data: string[] = [];
    for (const line of frame.split("\n")) {
      if (line.startsWith("event: ")) event = line.slice(7);
      else if (line.startsWith("data: ")) data.push(line.slice(6));
    }
    if (event === "turn" && data.length) {
      this.handlers.onTurn(JSON.parse(data.join("\n")) as Turn);
    }
  }
}
