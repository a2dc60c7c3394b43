/** Pure HTML-string renderers. Banner verdicts come only from API responses. */

import type { ApiClient } from "./api.js";
import type { HistoryEntry } from "./state.js";
import type { RecordPayload, SearchMatch, SearchResponse } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function confidenceClass(confidence: number | null): string {
  if (confidence === null) return "c-unknown";
  if (confidence >= 0.8) return "c-high";
  if (confidence >= 0.5) return "c-mid";
  return "c-low";
}

/** Per-character spans: shading from confidence, flag for confusable chars. */
export function renderPlateChars(
  plateText: string,
  confidences: number[] | null,
  confusablePairs: [string, string, number][],
): string {
  const confusable = new Set<string>();
  for (const [a, b] of confusablePairs) {
    confusable.add(a);
    confusable.add(b);
  }
  return plateText
    .split("")
    .map((ch, i) => {
      const conf = confidences && i < confidences.length ? confidences[i] : null;
      const classes = ["char", confidenceClass(conf)];
      if (confusable.has(ch)) classes.push("confusable");
      const title = conf === null ? "" : ` title="confidence ${conf.toFixed(2)}"`;
      return `<span class="${classes.join(" ")}"${title}>${escapeHtml(ch)}</span>`;
    })
    .join("");
}

export function renderBanner(response: SearchResponse | null): string {
  if (response === null) return `<div class="banner idle">enter a query</div>`;
  if (response.verdict === "found") {
    return `<div class="banner found" data-verdict="found">FOUND — ${response.matches.length} match(es)</div>`;
  }
  return (
    `<div class="banner not-found" data-verdict="not_found">NOT FOUND` +
    `<span class="hint">try widening the fuzz budget</span></div>`
  );
}

export function renderResultCard(
  match: SearchMatch,
  response: SearchResponse,
  client: ApiClient,
): string {
  const plate =
    match.plate_text === null
      ? `<span class="placeholder">no plate read</span>`
      : renderPlateChars(
          match.plate_text,
          match.char_confidences,
          response.query_echo.confusable_pairs,
        );
  const links = Object.entries(match.crop_urls)
    .map(
      ([kind, url]) =>
        `<a class="crop-link" data-kind="${escapeHtml(kind)}" href="${escapeHtml(
          client.cropUrl(url),
        )}">${escapeHtml(kind)}</a>`,
    )
    .join(" ");
  return (
    `<div class="card" data-record-id="${escapeHtml(match.record_id)}">` +
    `<span class="badge ${response.verdict === "found" ? "found" : "not-found"}">` +
    `${response.verdict === "found" ? "FOUND" : "NOT FOUND"}</span>` +
    `<span class="plate">${plate}</span>` +
    `<span class="category">${escapeHtml(match.category)}</span>` +
    `<span class="distance">d=${match.distance}</span>` +
    `<span class="links">${links}</span>` +
    `</div>`
  );
}

export function renderResults(response: SearchResponse, client: ApiClient): string {
  const cards = response.matches.map((m) => renderResultCard(m, response, client)).join("");
  return `${renderBanner(response)}<div class="cards">${cards}</div>`;
}

export function renderFieldError(code: string, message: string, field: string | null): string {
  const target = field ?? "form";
  return (
    `<div class="field-error" data-field="${escapeHtml(target)}" data-code="${escapeHtml(code)}">` +
    `${escapeHtml(message)}</div>`
  );
}

export function renderNetworkFailure(): string {
  return (
    `<div class="network-error">service unreachable` +
    `<button type="button" data-action="retry">retry</button></div>`
  );
}

export function renderHistory(entries: HistoryEntry[]): string {
  const items = entries
    .map(
      (e) =>
        `<li class="history-item" data-verdict="${e.verdict}">` +
        `${escapeHtml(e.request.type)} · ${escapeHtml(e.request.plate)} · fuzz ${e.request.fuzz}` +
        `</li>`,
    )
    .join("");
  return `<ol class="history">${items}</ol>`;
}

export function categoryCounts(records: RecordPayload[]): Map<string, number> {
  const counts = new Map<string, number>();
  for (const record of records) {
    counts.set(record.category, (counts.get(record.category) ?? 0) + 1);
  }
  return counts;
}

export function renderCategoryStrip(records: RecordPayload[]): string {
  const counts = categoryCounts(records);
  const cells = [...counts.entries()]
    .sort(([a], [b]) => a.localeCompare(b))
    .map(
      ([category, count]) =>
        `<span class="count" data-category="${escapeHtml(category)}">` +
        `${escapeHtml(category)}: ${count}</span>`,
    )
    .join("");
  return `<div class="category-strip">${cells}</div>`;
}

export function renderRecordRow(record: RecordPayload, client: ApiClient): string {
  const plate =
    record.plate_text === null
      ? `<span class="placeholder">no plate read</span>`
      : escapeHtml(record.plate_text);
  const thumb = record.crop_urls.vehicle
    ? `<img class="thumb" src="${escapeHtml(client.cropUrl(record.crop_urls.vehicle))}" alt="vehicle crop">`
    : `<span class="thumb placeholder">no crop</span>`;
  return (
    `<tr class="record" data-record-id="${escapeHtml(record.record_id)}" ` +
    `data-category="${escapeHtml(record.category)}">` +
    `<td>${thumb}</td><td>${plate}</td><td>${escapeHtml(record.category)}</td>` +
    `<td>${escapeHtml(record.ingested_at)}</td></tr>`
  );
}

export function renderRecordsView(
  allRecords: RecordPayload[],
  client: ApiClient,
  options: { categoryFilter?: string | null; page?: number; pageSize?: number } = {},
): string {
  const filter = options.categoryFilter ?? null;
  const pageSize = options.pageSize ?? 20;
  const page = options.page ?? 0;
  const filtered = filter ? allRecords.filter((r) => r.category === filter) : allRecords;
  if (allRecords.length === 0) {
    return `<div class="empty-state">no records ingested yet</div>`;
  }
  const visible = filtered.slice(page * pageSize, (page + 1) * pageSize);
  const rows = visible.map((r) => renderRecordRow(r, client)).join("");
  const pages = Math.max(1, Math.ceil(filtered.length / pageSize));
  return (
    renderCategoryStrip(allRecords) +
    `<table class="records"><tbody>${rows}</tbody></table>` +
    `<div class="pager" data-page="${page}" data-pages="${pages}">page ${page + 1} / ${pages}</div>`
  );
}
