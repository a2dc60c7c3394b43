/** Browser bootstrap: wires the form, results pane, history, and records view.
 *
 * All rendering goes through the pure functions in render.ts; this file only
 * touches the DOM and the ApiClient. It is compiled but not unit-tested; the
 * behavior lives in the tested modules.
 */

import { ApiClient, ApiRequestError, NetworkFailure, Superseded } from "./api.js";
import {
  FUZZ_STOPS,
  HistoryEntry,
  SearchFormState,
  buildSearchRequest,
  canSubmit,
  emptyForm,
  pushHistory,
} from "./state.js";
import {
  renderFieldError,
  renderHistory,
  renderNetworkFailure,
  renderRecordsView,
  renderResults,
} from "./render.js";
import { CATEGORIES } from "./types.js";

const client = new ApiClient(window.location.origin);
let form: SearchFormState = emptyForm();
let history: HistoryEntry[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function syncSubmitButton(): void {
  el<HTMLButtonElement>("submit").disabled = !canSubmit(form);
}

async function runSearch(): Promise<void> {
  const results = el("results");
  const request = buildSearchRequest(form);
  try {
    const response = await client.search(request);
    history = pushHistory(history, { request, verdict: response.verdict, at: Date.now() });
    results.innerHTML = renderResults(response, client);
    el("history").innerHTML = renderHistory(history);
  } catch (err) {
    if (err instanceof Superseded) return; // a newer query owns the pane
    if (err instanceof ApiRequestError) {
      results.innerHTML = renderFieldError(err.code, err.message, err.field);
    } else if (err instanceof NetworkFailure) {
      results.innerHTML = renderNetworkFailure();
      results
        .querySelector('[data-action="retry"]')
        ?.addEventListener("click", () => void runSearch());
    } else {
      throw err;
    }
  }
}

async function refreshRecords(filter: string | null, page: number): Promise<void> {
  const pane = el("records");
  try {
    const records = await client.allRecords();
    pane.innerHTML = renderRecordsView(records, client, { categoryFilter: filter, page });
  } catch {
    pane.innerHTML = renderNetworkFailure();
  }
}

export function mount(): void {
  const categorySelect = el<HTMLSelectElement>("category");
  categorySelect.innerHTML =
    `<option value="">select type</option>` +
    CATEGORIES.map((c) => `<option value="${c}">${c}</option>`).join("");
  categorySelect.addEventListener("change", () => {
    form.category = categorySelect.value || null;
    syncSubmitButton();
  });

  const plateInput = el<HTMLInputElement>("plate");
  plateInput.addEventListener("input", () => {
    form.plate = plateInput.value;
    syncSubmitButton();
  });

  const fuzzInput = el<HTMLInputElement>("fuzz");
  const fuzzLabel = el("fuzz-label");
  fuzzInput.addEventListener("input", () => {
    form.fuzz = Number(fuzzInput.value);
    const stop = FUZZ_STOPS.find((s) => s.value === form.fuzz);
    fuzzLabel.textContent = stop ? `${form.fuzz} (${stop.label})` : String(form.fuzz);
  });

  el<HTMLFormElement>("search-form").addEventListener("submit", (event) => {
    event.preventDefault();
    if (canSubmit(form)) void runSearch();
  });

  el<HTMLButtonElement>("load-records").addEventListener("click", () => {
    const filter = el<HTMLSelectElement>("record-filter").value || null;
    void refreshRecords(filter, 0);
  });

  syncSubmitButton();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", mount);
}
