// In-memory stand-in for the chat service, implementing the documented
// endpoint semantics (docs/api.md): envelopes, turn payloads, the SSE stream,
// and a kill switch to force stream disconnects.

import type {
  MementoPayload,
  MetricReport,
  Suggestion,
  TagRecord,
  Turn,
} from "../src/types.js";

export interface ScriptStep {
  reply: string;
  kind?: string;
  tagAfter?: TagRecord;
  unfilledAfter?: string[];
}

interface StreamHandle {
  controller: ReadableStreamDefaultController<Uint8Array>;
  closed: boolean;
}

const encoder = new TextEncoder();

function envelope(payload: unknown, error: { code: string; message: string } | null, status: number) {
  return new Response(
    JSON.stringify({ request_id: "r-test", payload, error }),
    { status, headers: { "content-type": "application/json" } },
  );
}

export class FakeServer {
  turns: Turn[] = [];
  memento: MementoPayload;
  status: "active" | "closed" = "active";
  rating: number | null = null;
  suggestions: Suggestion[] = [];
  dropNextAck = false;
  failNextPost = false;
  private streams: StreamHandle[] = [];
  private userTurns = 0;

  constructor(private script: ScriptStep[]) {
    this.memento = {
      memento_id: "m-chicago",
      owner: "alice",
      media_kind: "picture",
      uri_or_path: "chicago.jpg",
      visibility: "private",
      features: [
        { label: "skyline", salience: 0.9, source: "fixture" },
        { label: "water", salience: 0.4, source: "fixture" },
      ],
      tags: [],
      created_at: "2020-01-01T00:00:00Z",
      unfilled_slots: ["place", "time", "people", "occasion", "emotion"],
    };
  }

  // -- server-side behavior --------------------------------------------------

  private appendTurn(initiator: "user" | "bot", text: string, kind = "react"): Turn {
    const index = this.turns.length;
    const turn: Turn = {
      index,
      initiator,
      text,
      timestamp: `2020-01-01T00:00:${String(index).padStart(2, "0")}Z`,
      nlu:
        initiator === "user"
          ? { intent: "provide-info", entities: [], sentiment: 0, tokens: text.split(" ") }
          : null,
      action:
        initiator === "bot"
          ? { kind, rendered_text: text, question_id: "q-x", bindings: {}, task: null, rule_id: null }
          : null,
      response_latency_ms: initiator === "bot" ? 120 : null,
    };
    this.turns.push(turn);
    this.publish(turn);
    return turn;
  }

  private publish(turn: Turn): void {
    const data = JSON.stringify(turn);
    const frame = `id: ${turn.index}\nevent: turn\ndata: ${data}\n\n`;
    for (const handle of this.streams) {
      if (!handle.closed) handle.controller.enqueue(encoder.encode(frame));
    }
  }

  /** Simulate a dropped connection on every open stream. */
  killStreams(): void {
    for (const handle of this.streams) {
      if (!handle.closed) {
        handle.closed = true;
        handle.controller.close();
      }
    }
    this.streams = [];
  }

  openStreamCount(): number {
    return this.streams.filter((h) => !h.closed).length;
  }

  private report(): MetricReport {
    return {
      session_id: "s-0001",
      turns_total: this.turns.length,
      user_turns: this.turns.filter((t) => t.initiator === "user").length,
      duration_minutes: this.turns.length ? (this.turns.length - 1) / 60 : 0,
      cumulative_avg_sentiment: 0,
      engagement_rating: this.rating,
      tasks_initiated: 1,
      tasks_completed: 1,
      completion_rate: 1,
      tasks_none_initiated: false,
      mean_completion_turns: 2,
      consistency: 1,
      memory_violations: 0,
      mean_response_ms: 120,
      greeting_used: false,
      proactivity: 0,
    };
  }

  // -- fetch-compatible entry point -------------------------------------------

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const { pathname, searchParams } = new URL(url, "http://fake");
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : null;

    if (method === "POST" && pathname === "/api/sessions") {
      this.appendTurn("bot", "Hello Alice! I'd love to look at some of your memories together.", "greet");
      this.appendTurn("bot", "Nice picture! It looks like a big city. Where was it taken?", "elicit-slot");
      return envelope({ session_id: "s-0001", turns: this.turns.slice() }, null, 201);
    }

    if (method === "POST" && pathname === "/api/sessions/s-0001/messages") {
      if (this.status !== "active") {
        return envelope(null, { code: "session-closed", message: "closed" }, 409);
      }
      if (this.failNextPost) {
        this.failNextPost = false;
        throw new TypeError("network down"); // nothing processed server-side
      }
      const step = this.script[this.userTurns] ?? { reply: "Tell me more." };
      this.userTurns += 1;
      const user = this.appendTurn("user", body.text);
      const bot = this.appendTurn("bot", step.reply, step.kind ?? "react");
      if (step.tagAfter) this.memento.tags.push(step.tagAfter);
      if (step.unfilledAfter) this.memento.unfilled_slots = step.unfilledAfter;
      if (this.dropNextAck) {
        this.dropNextAck = false;
        throw new TypeError("network down"); // processed, but the ack is lost
      }
      return envelope(
        {
          session_id: "s-0001",
          turns: [user, bot],
          active_memento: structuredClone(this.memento),
          metrics: this.report(),
        },
        null,
        200,
      );
    }

    if (method === "GET" && pathname === "/api/sessions/s-0001/turns") {
      const since = Number(searchParams.get("since") ?? "0");
      return envelope(
        { session_id: "s-0001", turns: this.turns.filter((t) => t.index >= since), status: this.status },
        null,
        200,
      );
    }

    if (method === "GET" && pathname === "/api/sessions/s-0001/events") {
      const server = this;
      const stream = new ReadableStream<Uint8Array>({
        start(controller) {
          controller.enqueue(encoder.encode(": connected\n\n"));
          server.streams.push({ controller, closed: false });
        },
      });
      return new Response(stream, { status: 200, headers: { "content-type": "text/event-stream" } });
    }

    if (method === "POST" && pathname === "/api/sessions/s-0001/end") {
      if (this.status === "closed") {
        return envelope(null, { code: "session-closed", message: "already closed" }, 409);
      }
      this.status = "closed";
      this.rating = body.rating ?? null;
      return envelope({ report: this.report() }, null, 200);
    }

    if (method === "GET" && pathname === "/api/sessions/s-0001/metrics") {
      return envelope({ report: this.report() }, null, 200);
    }

    if (method === "GET" && pathname === "/api/people/alice/suggestions") {
      return envelope({ suggestions: this.suggestions }, null, 200);
    }

    if (method === "POST" && pathname === "/api/mementos") {
      const withFixture = Boolean(body.feature_fixture);
      return envelope(
        {
          memento: {
            ...structuredClone(this.memento),
            memento_id: "m-0002",
            uri_or_path: body.uri,
            features: withFixture ? this.memento.features : [],
            tags: [],
            unfilled_slots: ["place", "time", "people", "occasion", "emotion"],
          },
          adapter_unavailable: !withFixture,
        },
        null,
        201,
      );
    }

    return envelope(null, { code: "not-found", message: `no route ${method} ${pathname}` }, 404);
  };
}
