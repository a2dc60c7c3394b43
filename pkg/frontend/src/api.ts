/** Thin client for /api/v1 with single-in-flight search semantics. */

import type { RecordsPage, SearchRequest, SearchResponse } from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly field: string | null = null,
  ) {
    super(message);
  }
}

export class NetworkFailure extends Error {}

/** Thrown to the loser when a newer search supersedes an in-flight one. */
export class Superseded extends Error {}

async function parseError(response: Response): Promise<ApiRequestError> {
  try {
    const body = await response.json();
    return new ApiRequestError(
      response.status,
      body.error.code,
      body.error.message,
      body.error.field ?? null,
    );
  } catch {
    return new ApiRequestError(response.status, "InvalidRequest", response.statusText);
  }
}

export class ApiClient {
  private inflightSearch: AbortController | null = null;

  constructor(private readonly baseUrl: string) {}

  url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  /** POST /api/v1/search; a later call aborts any earlier one still running. */
  async search(request: SearchRequest): Promise<SearchResponse> {
    this.inflightSearch?.abort();
    const controller = new AbortController();
    this.inflightSearch = controller;
    let response: Response;
    try {
      response = await fetch(this.url("/api/v1/search"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
        signal: controller.signal,
      });
    } catch (err) {
      if (controller.signal.aborted) throw new Superseded("search superseded");
      throw new NetworkFailure(String(err));
    } finally {
      if (this.inflightSearch === controller) this.inflightSearch = null;
    }
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as SearchResponse;
  }

  async records(offset: number, count: number): Promise<RecordsPage> {
    let response: Response;
    try {
      response = await fetch(this.url(`/api/v1/records?offset=${offset}&count=${count}`));
    } catch (err) {
      throw new NetworkFailure(String(err));
    }
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as RecordsPage;
  }

  /** Page through /records until the reported total is covered. */
  async allRecords(pageSize = 100): Promise<RecordsPage["records"]> {
    const records: RecordsPage["records"] = [];
    let offset = 0;
    for (;;) {
      const page = await this.records(offset, pageSize);
      records.push(...page.records);
      offset += page.count;
      if (offset >= page.total || page.count === 0) break;
    }
    return records;
  }

  cropUrl(relative: string): string {
    return relative.startsWith("/") ? this.url(relative) : this.url("/" + relative);
  }
}
