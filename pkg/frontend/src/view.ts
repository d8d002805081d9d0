/** DOM rendering for the chat page; all state lives in ChatSession. */

import { GoalSummary } from "./api.js";
import { ChatState } from "./session.js";

export interface PageElements {
  goalPicker: HTMLElement;
  goalList: HTMLSelectElement;
  annotatorInput: HTMLInputElement;
  startButton: HTMLButtonElement;
  chatPanel: HTMLElement;
  goalText: HTMLElement;
  instructionList: HTMLElement;
  messageLog: HTMLElement;
  messageInput: HTMLInputElement;
  sendButton: HTMLButtonElement;
  completeButton: HTMLButtonElement;
  abandonButton: HTMLButtonElement;
  errorBanner: HTMLElement;
  confirmation: HTMLElement;
}

export function grabElements(root: Document): PageElements {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = root.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  };
  return {
    goalPicker: byId("goal-picker"),
    goalList: byId<HTMLSelectElement>("goal-list"),
    annotatorInput: byId<HTMLInputElement>("annotator-id"),
    startButton: byId<HTMLButtonElement>("start-session"),
    chatPanel: byId("chat-panel"),
    goalText: byId("goal-text"),
    instructionList: byId("instruction-list"),
    messageLog: byId("message-log"),
    messageInput: byId<HTMLInputElement>("message-input"),
    sendButton: byId<HTMLButtonElement>("send-message"),
    completeButton: byId<HTMLButtonElement>("complete-session"),
    abandonButton: byId<HTMLButtonElement>("abandon-session"),
    errorBanner: byId("error-banner"),
    confirmation: byId("confirmation"),
  };
}

export function renderGoals(el: PageElements, goals: GoalSummary[]): void {
  el.goalList.innerHTML = "";
  for (const goal of goals) {
    const option = document.createElement("option");
    option.value = goal.goal_id;
    option.textContent = `${goal.goal_id} (${goal.domains.join(", ")})`;
    el.goalList.appendChild(option);
  }
}

export function render(el: PageElements, state: ChatState): void {
  const inSession = state.phase === "open" || state.phase === "busy";
  el.goalPicker.hidden = inSession;
  el.chatPanel.hidden = !inSession && state.phase !== "finished";

  el.errorBanner.hidden = !state.error;
  el.errorBanner.textContent = state.error ?? "";

  if (state.view) {
    el.goalText.textContent = state.view.nl_goal;
    el.instructionList.innerHTML = "";
    for (const instruction of state.view.complexity_instructions) {
      const item = document.createElement("li");
      item.textContent = instruction;
      el.instructionList.appendChild(item);
    }
  }

  el.messageLog.innerHTML = "";
  for (const message of state.messages) {
    const bubble = document.createElement("div");
    bubble.className = `bubble ${message.speaker}`;
    bubble.textContent = message.text;
    el.messageLog.appendChild(bubble);
  }
  el.messageLog.scrollTop = el.messageLog.scrollHeight;

  // input is disabled during the round-trip and after close;
  // a failed send leaves the typed text in place for resend
  el.messageInput.disabled = state.phase !== "open";
  el.messageInput.value = state.pendingInput || el.messageInput.value;
  if (!state.pendingInput && state.phase === "open" && !state.error) {
    el.messageInput.value = "";
  }
  el.sendButton.disabled = state.phase !== "open" || !el.messageInput.value.trim();
  el.completeButton.disabled = state.phase !== "open";
  el.abandonButton.disabled = state.phase !== "open";

  if (state.phase === "finished" && state.receipt) {
    el.confirmation.hidden = false;
    el.confirmation.textContent =
      `Session ${state.receipt.state.toLowerCase()} with ` +
      `${state.receipt.turn_count} turns recorded. Pick another goal to continue.`;
    el.chatPanel.hidden = true;
    el.goalPicker.hidden = false;
  } else {
    el.confirmation.hidden = true;
  }
}
