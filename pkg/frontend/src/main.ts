/** Page wiring: one active session per tab, talking to the collection service.
 *
 * The service base URL comes from ?service=... or defaults to same-origin.
 */

import { ServiceClient } from "./api.js";
import { ChatSession } from "./session.js";
import { grabElements, render, renderGoals } from "./view.js";

function serviceBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("service");
  return fromQuery ?? window.location.origin;
}

async function init(): Promise<void> {
  const el = grabElements(document);
  const client = new ServiceClient(serviceBase());
  const session = new ChatSession(client, (state) => render(el, state));

  try {
    renderGoals(el, await client.listGoals());
  } catch (err) {
    el.errorBanner.hidden = false;
    el.errorBanner.textContent = `Cannot reach the collection service: ${err}`;
    return;
  }

  el.startButton.addEventListener("click", () => {
    const goalId = el.goalList.value;
    const annotator = el.annotatorInput.value.trim();
    if (!goalId || !annotator) {
      el.errorBanner.hidden = false;
      el.errorBanner.textContent = "Pick a goal and enter your annotator id first.";
      return;
    }
    void session.start(goalId, annotator);
  });

  const sendCurrent = () => {
    const text = el.messageInput.value.trim();
    if (text && session.canSend()) {
      void session.send(text);
    }
  };
  el.sendButton.addEventListener("click", sendCurrent);
  el.messageInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      sendCurrent();
    }
  });
  el.messageInput.addEventListener("input", () => {
    el.sendButton.disabled = !el.messageInput.value.trim() || !session.canSend();
  });

  el.completeButton.addEventListener("click", () => void session.finish("Completed"));
  el.abandonButton.addEventListener("click", () => void session.finish("Abandoned"));

  render(el, session.state());
}

document.addEventListener("DOMContentLoaded", () => void init());
