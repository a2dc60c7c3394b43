/** Form state and pure transitions. Verdicts never originate here. */

import type { SearchRequest } from "./types.js";

/** UI-side mirror of plate normalization, used only to gate the submit button. */
export function normalizePlate(raw: string): string {
  return raw.toUpperCase().replace(/[^0-9A-Z]/g, "");
}

export interface SearchFormState {
  category: string | null;
  plate: string;
  fuzz: number;
  limit: number;
}

export const FUZZ_STOPS = [
  { value: 0, label: "exact" },
  { value: 0.25, label: "one confusable" },
  { value: 0.5, label: "two confusables" },
] as const;

export function emptyForm(): SearchFormState {
  return { category: null, plate: "", fuzz: 0, limit: 20 };
}

export function canSubmit(form: SearchFormState): boolean {
  return form.category !== null && form.fuzz >= 0 && normalizePlate(form.plate).length > 0;
}

/** Lossless form -> request mapping: every field appears verbatim. */
export function buildSearchRequest(form: SearchFormState): SearchRequest {
  if (!canSubmit(form)) {
    throw new Error("form is not submittable");
  }
  return { type: form.category as string, plate: form.plate, fuzz: form.fuzz, limit: form.limit };
}

export interface HistoryEntry {
  request: SearchRequest;
  verdict: "found" | "not_found";
  at: number;
}

export const HISTORY_LIMIT = 10;

export function pushHistory(history: HistoryEntry[], entry: HistoryEntry): HistoryEntry[] {
  return [entry, ...history].slice(0, HISTORY_LIMIT);
}
