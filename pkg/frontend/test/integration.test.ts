// End-to-end against the real chat service. Run via `npm run e2e`, which
// boots the Python server and sets REMI_E2E_URL; skipped otherwise.

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionStore } from "../src/store.js";
import { slotMeter, tagChips, transcriptLines } from "../src/view.js";

const baseUrl = process.env.REMI_E2E_URL;

function waitFor(predicate: () => boolean, ms = 5000): Promise<void> {
  return new Promise((resolve, reject) => {
    const started = Date.now();
    const tick = () => {
      if (predicate()) return resolve();
      if (Date.now() - started > ms) return reject(new Error("timed out"));
      setTimeout(tick, 20);
    };
    tick();
  });
}

describe.skipIf(!baseUrl)("live server", () => {
  it("mirrors the server transcript, tags and rating through a real session", async () => {
    const api = new ApiClient(baseUrl!);
    const store = new SessionStore(api);

    await store.createSession("alice", "m-chicago");
    await waitFor(() => store.getState().streamState === "open");

    await store.sendMessage("It was taken in Chicago");
    await store.sendMessage("I lived there in the 80s");
    await waitFor(() => store.getState().turns.length === 6);

    const serverTurns = (await api.getTurns("s-0001", 0)).turns;
    expect(transcriptLines(store.getState())).toEqual(
      serverTurns.map((t) => `${t.initiator}: ${t.text}`),
    );
    expect(store.getState().turns[3].text).toBe(
      "That's far away from Trento! Were you visiting Chicago?",
    );

    expect(tagChips(store.getState().memento)).toContain("place: Chicago");
    expect(slotMeter(store.getState().memento)).toBeCloseTo(1 - 4 / 5, 12);

    await store.endSession(4);
    const report = await store.fetchReport();
    expect(report.engagement_rating).toBe(4);

    const suggestions = store.getState().suggestions;
    expect(suggestions[0]?.person_id).toBe("bob");

    store.stop();
  });
});
