// HTML builders for each phase. Pure string functions so the whole surface
// is testable without a DOM; the entry module assigns the result to
// innerHTML and wires events by delegation.

import type { StrippedContent, StrippedQuestion, SubmissionResult, AnswerValue } from "./api.js";
import { formatScorePercent, passbackNotice, type PlayerState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function header(content: StrippedContent): string {
  return `
    <header>
      <h1>${escapeHtml(content.title)}</h1>
      <p class="topic">${escapeHtml(content.topic)}</p>
    </header>`;
}

export function renderIntro(content: StrippedContent): string {
  return `${header(content)}
    <section class="intro">
      <p>${escapeHtml(content.introduction)}</p>
    </section>
    <button data-action="advance">Start</button>`;
}

export function renderExplanation(content: StrippedContent): string {
  const exp = content.explanation;
  let media = "";
  if (exp.kind === "video" && exp.uri) {
    const minutes = exp.duration ? Math.round(exp.duration / 60) : null;
    media = `
      <iframe class="video" src="${escapeHtml(exp.uri)}" allowfullscreen title="video"></iframe>
      ${minutes !== null ? `<p class="duration">${minutes} min video</p>` : ""}`;
  } else if (exp.uri) {
    media = `<p><a href="${escapeHtml(exp.uri)}" target="_blank" rel="noopener">Open the material</a></p>`;
  }
  const body = exp.body ? `<p>${escapeHtml(exp.body)}</p>` : "";
  return `${header(content)}
    <section class="explanation">${media}${body}</section>
    <button data-action="advance">Go to the quiz</button>`;
}

function renderQuestion(question: StrippedQuestion, index: number, response: AnswerValue): string {
  const name = `q${index}`;
  let inputs = "";
  if (question.kind === "multiple_choice_single") {
    inputs = question.options
      .map((option, i) => {
        const checked = response === i ? " checked" : "";
        return `<label><input type="radio" name="${name}" data-question="${index}" value="${i}"${checked}> ${escapeHtml(option)}</label>`;
      })
      .join("\n");
  } else if (question.kind === "multiple_choice_multi") {
    const picked = Array.isArray(response) ? response : [];
    inputs = question.options
      .map((option, i) => {
        const checked = picked.includes(i) ? " checked" : "";
        return `<label><input type="checkbox" name="${name}" data-question="${index}" value="${i}"${checked}> ${escapeHtml(option)}</label>`;
      })
      .join("\n");
  } else {
    const value = typeof response === "string" ? response : "";
    inputs = `<input type="text" name="${name}" data-question="${index}" value="${escapeHtml(value)}" placeholder="Type your answer">`;
  }
  return `
    <fieldset data-kind="${question.kind}">
      <legend>${index + 1}. ${escapeHtml(question.prompt)}</legend>
      ${inputs}
    </fieldset>`;
}

export function renderQuiz(state: PlayerState): string {
  const questions = state.content.quiz
    .map((question, index) => renderQuestion(question, index, state.responses[index]))
    .join("\n");
  const ready = state.responses.every(
    (r) => r !== null && (!Array.isArray(r) ? String(r).trim() !== "" : r.length > 0),
  );
  return `${header(state.content)}
    <form class="quiz" data-role="quiz">
      ${questions}
      <button type="button" data-action="submit"${ready ? "" : " disabled"}>Submit answers</button>
    </form>`;
}

export function renderResult(content: StrippedContent, result: SubmissionResult): string {
  const notice = passbackNotice(result.passback);
  const rows = result.per_question
    .map((entry, index) => {
      const mark = entry.correct ? "correct" : "incorrect";
      const feedback = entry.feedback ? ` <span class="feedback">${escapeHtml(entry.feedback)}</span>` : "";
      return `<li class="${mark}"><strong>${index + 1}.</strong> ${mark}${feedback}</li>`;
    })
    .join("\n");
  return `${header(content)}
    <section class="result">
      <p class="score">Score: <strong>${formatScorePercent(result.score)}</strong></p>
      <p class="passback ${notice.level}">${escapeHtml(notice.message)}</p>
      <ol class="per-question">${rows}</ol>
    </section>
    <button data-action="retry">Try again</button>`;
}

export function renderRelaunchPrompt(): string {
  return `
    <section class="relaunch">
      <p>The session has expired. Go back to your course and open the activity again.</p>
    </section>`;
}

export function renderErrorBanner(message: string): string {
  return `<div class="banner warn" data-role="error">${escapeHtml(message)} <button data-action="submit">Retry</button></div>`;
}

export function renderPhase(state: PlayerState): string {
  switch (state.phase) {
    case "intro":
      return renderIntro(state.content);
    case "explanation":
      return renderExplanation(state.content);
    case "quiz":
      return renderQuiz(state);
    case "result":
      return state.result ? renderResult(state.content, state.result) : renderQuiz(state);
  }
}
