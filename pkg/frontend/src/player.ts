// Browser entry point: reads the session token handed over by the launch
// redirect, drives the state machine, and keeps the DOM in sync.

import { fetchContent, submitAnswers, SessionExpiredError, type AnswerValue } from "./api.js";
import {
  advance,
  answerQuestion,
  applyResult,
  canSubmit,
  initialState,
  retry,
  type PlayerState,
} from "./state.js";
import { renderErrorBanner, renderPhase, renderRelaunchPrompt } from "./render.js";
import { loadResponses, saveResponses, type StorageLike } from "./storage.js";

function tokenFromPage(): string | null {
  const fromQuery = new URLSearchParams(window.location.search).get("token");
  if (fromQuery) return fromQuery;
  const match = document.cookie.match(/(?:^|;\s*)microlti_session=([^;]+)/);
  return match ? decodeURIComponent(match[1]) : null;
}

function responseFromInputs(root: HTMLElement, state: PlayerState, index: number): AnswerValue {
  const kind = state.content.quiz[index].kind;
  if (kind === "multiple_choice_single") {
    const checked = root.querySelector<HTMLInputElement>(`input[name="q${index}"]:checked`);
    return checked ? Number(checked.value) : null;
  }
  if (kind === "multiple_choice_multi") {
    const checked = [...root.querySelectorAll<HTMLInputElement>(`input[name="q${index}"]:checked`)];
    return checked.length ? checked.map((input) => Number(input.value)) : null;
  }
  const field = root.querySelector<HTMLInputElement>(`input[name="q${index}"]`);
  return field && field.value.trim() ? field.value : null;
}

export async function boot(root: HTMLElement, storage: StorageLike = window.localStorage): Promise<void> {
  const token = tokenFromPage();
  if (!token) {
    root.innerHTML = renderRelaunchPrompt();
    return;
  }

  let state: PlayerState;
  try {
    const content = await fetchContent(token);
    state = initialState(content, loadResponses(token, content.quiz.length, storage));
  } catch (error) {
    root.innerHTML =
      error instanceof SessionExpiredError
        ? renderRelaunchPrompt()
        : renderErrorBanner(String(error));
    return;
  }

  let submitting = false;
  const paint = () => {
    root.innerHTML = renderPhase(state);
  };

  const submit = async () => {
    if (submitting || !canSubmit(state)) return;
    submitting = true;
    const button = root.querySelector<HTMLButtonElement>('[data-action="submit"]');
    if (button) button.disabled = true;
    try {
      const result = await submitAnswers(token, state.responses);
      state = applyResult(state, result);
      paint();
    } catch (error) {
      if (error instanceof SessionExpiredError) {
        root.innerHTML = renderRelaunchPrompt();
      } else {
        // responses stay in place; the banner offers a retry
        paint();
        root.insertAdjacentHTML(
          "afterbegin",
          renderErrorBanner("Submitting failed. Check your connection and retry."),
        );
      }
    } finally {
      submitting = false;
    }
  };

  root.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!target) return;
    const action = target.dataset.action;
    if (action === "advance") {
      state = advance(state);
      paint();
    } else if (action === "retry") {
      state = retry(state);
      paint();
    } else if (action === "submit") {
      void submit();
    }
  });

  root.addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    const question = input.dataset.question;
    if (question === undefined || state.phase !== "quiz") return;
    const index = Number(question);
    state = answerQuestion(state, index, responseFromInputs(root, state, index));
    saveResponses(token, state.responses, storage);
    const button = root.querySelector<HTMLButtonElement>('[data-action="submit"]');
    if (button) button.disabled = !canSubmit(state);
  });

  root.addEventListener("input", (event) => {
    const input = event.target as HTMLInputElement;
    if (input.type !== "text" || input.dataset.question === undefined || state.phase !== "quiz") return;
    const index = Number(input.dataset.question);
    state = answerQuestion(state, index, input.value.trim() ? input.value : null);
    saveResponses(token, state.responses, storage);
    const button = root.querySelector<HTMLButtonElement>('[data-action="submit"]');
    if (button) button.disabled = !canSubmit(state);
  });

  paint();
}

const appRoot = typeof document !== "undefined" ? document.getElementById("app") : null;
if (appRoot) {
  void boot(appRoot);
}
