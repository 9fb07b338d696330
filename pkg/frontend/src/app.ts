// DOM glue: renders the store state into the three panes and forwards input.

import { ApiClient } from "./api.js";
import { SessionStore } from "./store.js";
import {
  bubbles,
  featureChips,
  reportRows,
  slotMeter,
  suggestionCards,
  tagChips,
} from "./view.js";

const api = new ApiClient(window.location.origin);
const store = new SessionStore(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const chatLog = el<HTMLDivElement>("chat-log");
const chatInput = el<HTMLInputElement>("chat-input");
const sendButton = el<HTMLButtonElement>("send-button");
const startForm = el<HTMLFormElement>("start-form");
const personInput = el<HTMLInputElement>("person-input");
const mementoInput = el<HTMLInputElement>("memento-input");
const uploadForm = el<HTMLFormElement>("upload-form");
const uploadUri = el<HTMLInputElement>("upload-uri");
const uploadFixture = el<HTMLInputElement>("upload-fixture");
const featureRow = el<HTMLDivElement>("feature-chips");
const tagRow = el<HTMLDivElement>("tag-chips");
const meterFill = el<HTMLDivElement>("meter-fill");
const meterLabel = el<HTMLSpanElement>("meter-label");
const streamBadge = el<HTMLSpanElement>("stream-badge");
const noticeBox = el<HTMLDivElement>("notice");
const endButton = el<HTMLButtonElement>("end-button");
const ratingSelect = el<HTMLSelectElement>("rating-select");
const reportCard = el<HTMLDivElement>("report-card");
const suggestionBox = el<HTMLDivElement>("suggestion-cards");

function chip(text: string, kind: string): HTMLSpanElement {
  const span = document.createElement("span");
  span.className = `chip ${kind}`;
  span.textContent = text;
  return span;
}

function render(): void {
  const state = store.getState();

  chatLog.replaceChildren(
    ...bubbles(state).map((bubble) => {
      const div = document.createElement("div");
      div.className = `bubble ${bubble.initiator}${bubble.pending ? " pending" : ""}${
        bubble.failed ? " failed" : ""
      }`;
      div.textContent = bubble.text;
      if (bubble.failed && bubble.localId !== undefined) {
        const retry = document.createElement("button");
        retry.textContent = "retry";
        retry.className = "retry";
        retry.onclick = () => void store.retryMessage(bubble.localId!);
        div.appendChild(retry);
      }
      return div;
    }),
  );
  chatLog.scrollTop = chatLog.scrollHeight;

  featureRow.replaceChildren(
    ...(featureChips(state.memento).length
      ? featureChips(state.memento).map((label) => chip(label, "feature"))
      : [chip(state.memento ? "no features detected" : "no memento yet", "muted")]),
  );
  tagRow.replaceChildren(...tagChips(state.memento).map((label) => chip(label, "tag")));

  const fraction = slotMeter(state.memento);
  meterFill.style.width = `${Math.round(fraction * 100)}%`;
  meterLabel.textContent = `${Math.round(fraction * 100)}% of slots filled`;

  streamBadge.textContent = state.streamState;
  streamBadge.className = `badge ${state.streamState}`;

  noticeBox.textContent = state.notice ?? "";
  noticeBox.hidden = !state.notice;

  const active = state.status === "active";
  chatInput.disabled = !active;
  sendButton.disabled = !active;
  endButton.disabled = !active;

  reportCard.replaceChildren();
  if (state.report) {
    const title = document.createElement("h3");
    title.textContent = "Session summary";
    reportCard.appendChild(title);
    const list = document.createElement("dl");
    for (const [label, value] of reportRows(state)) {
      const dt = document.createElement("dt");
      dt.textContent = label;
      const dd = document.createElement("dd");
      dd.textContent = value;
      list.append(dt, dd);
    }
    reportCard.appendChild(list);
  }

  const cards = suggestionCards(state.suggestions);
  suggestionBox.hidden = cards.length === 0;
  suggestionBox.replaceChildren(
    ...cards.map((text) => {
      const card = document.createElement("div");
      card.className = "suggestion";
      card.textContent = text;
      return card;
    }),
  );
}

store.subscribe(render);
render();

startForm.onsubmit = (event) => {
  event.preventDefault();
  const person = personInput.value.trim();
  if (!person) return;
  void store
    .createSession(person, mementoInput.value.trim() || undefined)
    .catch((error) => window.alert(String(error)));
};

function send(): void {
  const text = chatInput.value.trim();
  if (!text) return; // empty sends blocked client-side
  chatInput.value = "";
  void store.sendMessage(text);
}

sendButton.onclick = send;
chatInput.onkeydown = (event) => {
  if (event.key === "Enter") send();
};

uploadForm.onsubmit = (event) => {
  event.preventDefault();
  const state = store.getState();
  if (!state.personId) {
    window.alert("start a session first");
    return;
  }
  void store
    .registerMemento(state.personId, uploadUri.value.trim(), "private", uploadFixture.value.trim() || undefined)
    .catch((error) => window.alert(String(error)));
};

endButton.onclick = () => {
  const rating = ratingSelect.value ? Number(ratingSelect.value) : null;
  void store.endSession(rating);
};
