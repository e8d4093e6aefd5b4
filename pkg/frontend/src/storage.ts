// Mid-quiz persistence: responses are kept per session token so a reload
// restores what the student already entered.

import type { AnswerValue } from "./api.js";

export type StorageLike = {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
};

const keyFor = (token: string) => `microlti-player:${token}`;

export function saveResponses(token: string, responses: AnswerValue[], storage: StorageLike): void {
  storage.setItem(keyFor(token), JSON.stringify(responses));
}

export function loadResponses(token: string, count: number, storage: StorageLike): AnswerValue[] | null {
  const raw = storage.getItem(keyFor(token));
  if (raw === null) return null;
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!Array.isArray(parsed) || parsed.length !== count) return null;
  return parsed.map((value) => {
    if (value === null || typeof value === "number" || typeof value === "string") return value;
    if (Array.isArray(value) && value.every((item) => typeof item === "number")) return value;
    return null;
  });
}

export function clearResponses(token: string, storage: StorageLike): void {
  storage.removeItem(keyFor(token));
}
