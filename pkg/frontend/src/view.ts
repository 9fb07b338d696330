// Pure view-model helpers: everything the DOM layer shows is derived here,
// so transcript fidelity is testable without a browser.

import type { UiSessionState } from "./store.js";
import type { MementoPayload, Suggestion } from "./types.js";

export interface Bubble {
  initiator: "user" | "bot";
  text: string;
  pending?: boolean;
  failed?: boolean;
  localId?: number;
}

export const SLOT_COUNT = 5;

/** Chat bubbles in display order: the server transcript, then optimistic sends. */
export function bubbles(state: UiSessionState): Bubble[] {
  const fromServer: Bubble[] = state.turns.map((t) => ({
    initiator: t.initiator,
    text: t.text,
  }));
  const fromPending: Bubble[] = state.pending.map((p) => ({
    initiator: "user",
    text: p.text,
    pending: !p.failed,
    failed: p.failed,
    localId: p.localId,
  }));
  return [...fromServer, ...fromPending];
}

/** The transcript the user is shown, server turns only. */
export function transcriptLines(state: UiSessionState): string[] {
  return state.turns.map((t) => `${t.initiator}: ${t.text}`);
}

export function tagChips(memento: MementoPayload | null): string[] {
  if (!memento) return [];
  return memento.tags.map(
    (t) => `${t.slot}: ${t.value}${t.confirmed_by_user ? "" : " (unconfirmed)"}`,
  );
}

export function featureChips(memento: MementoPayload | null): string[] {
  if (!memento) return [];
  return memento.features.map((f) => f.label);
}

/** Completion fraction of the memento's informational slots. */
export function slotMeter(memento: MementoPayload | null): number {
  if (!memento) return 0;
  return 1 - memento.unfilled_slots.length / SLOT_COUNT;
}

export function suggestionCards(suggestions: Suggestion[]): string[] {
  return suggestions.map((s) => {
    const shared = s.shared.length
      ? s.shared.map(([, predicate, object]) => `${predicate.replace(/-/g, " ")} ${object}`).join(", ")
      : "similar memories";
    return `${s.display_name} — shared: ${shared}`;
  });
}

export function reportRows(state: UiSessionState): [string, string][] {
  if (!state.report) return [];
  return Object.entries(state.report)
    .sort(([a], [b]) => (a < b ? -1 : 1))
    .map(([key, value]) => [key.replace(/_/g, " "), String(value)]);
}
