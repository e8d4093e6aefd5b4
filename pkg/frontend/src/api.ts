// Typed client for the tool provider's session endpoints. The player only
// ever sees answer-stripped content; correctness comes back from the server
// in the submission result.

export type ExplanationPayload = {
  kind: "video" | "interactive" | "visual" | "text";
  uri?: string;
  body?: string;
  duration?: number;
};

export type StrippedQuestion = {
  kind: "multiple_choice_single" | "multiple_choice_multi" | "short_answer";
  prompt: string;
  options: string[];
  feedback?: string;
};

export type StrippedContent = {
  id: string;
  title: string;
  topic: string;
  authors: string[];
  date: string;
  tags: string[];
  introduction: string;
  explanation: ExplanationPayload;
  quiz: StrippedQuestion[];
  version: number;
};

export type AnswerValue = number | number[] | string | null;

export type PassbackStatus = {
  status: "delivered" | "failed" | "not-configured";
  reason: string | null;
};

export type SubmissionResult = {
  score: number;
  per_question: { correct: boolean; feedback: string | null }[];
  passback: PassbackStatus;
};

export class SessionExpiredError extends Error {
  constructor() {
    super("The session has expired. Relaunch the activity from your course.");
    this.name = "SessionExpiredError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export type ApiOptions = {
  base?: string;
  fetchImpl?: FetchLike;
};

const defaultFetch: FetchLike = (input, init) => fetch(input, init);

export async function fetchContent(token: string, options: ApiOptions = {}): Promise<StrippedContent> {
  const { base = "", fetchImpl = defaultFetch } = options;
  const res = await fetchImpl(`${base}/api/session/${encodeURIComponent(token)}/content`);
  if (res.status === 401) throw new SessionExpiredError();
  if (!res.ok) throw new Error(`Loading the content failed (HTTP ${res.status}).`);
  return (await res.json()) as StrippedContent;
}

export async function submitAnswers(
  token: string,
  answers: AnswerValue[],
  options: ApiOptions = {},
): Promise<SubmissionResult> {
  const { base = "", fetchImpl = defaultFetch } = options;
  const res = await fetchImpl(`${base}/api/session/${encodeURIComponent(token)}/submit`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ answers }),
  });
  if (res.status === 401) throw new SessionExpiredError();
  if (!res.ok) throw new Error(`Submitting the quiz failed (HTTP ${res.status}).`);
  return (await res.json()) as SubmissionResult;
}
