/** Loads the frozen /api/v1 contract fixtures shared with the service tests. */

import { readFileSync, readdirSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { RecordsPage, SearchRequest, SearchResponse } from "../src/types.js";

const CONTRACTS_DIR = join(
  dirname(fileURLToPath(import.meta.url)),
  "..",
  "..",
  "contracts",
  "api_v1",
);

export interface SearchFixture {
  request: { method: string; path: string; body: SearchRequest };
  response: SearchResponse;
}

export interface RecordsFixture {
  request: { method: string; path: string };
  response: RecordsPage;
}

function load(name: string): unknown {
  return JSON.parse(readFileSync(join(CONTRACTS_DIR, `${name}.json`), "utf-8"));
}

export const exactHit = load("search_exact_hit") as SearchFixture;
export const emptyResult = load("search_empty_result") as SearchFixture;
export const mnFuzz0 = load("search_mn_fuzz0") as SearchFixture;
export const mnFuzz05 = load("search_mn_fuzz05") as SearchFixture;

export const recordPages: RecordsFixture[] = readdirSync(CONTRACTS_DIR)
  .filter((f) => f.startsWith("records_page_"))
  .sort()
  .map((f) => load(f.replace(/\.json$/, "")) as RecordsFixture);

export const searchFixtures: SearchFixture[] = [exactHit, emptyResult, mnFuzz0, mnFuzz05];

/**
 * Deliberately violates the server invariant (verdict says not_found while
 * matches is non-empty). Served only by the mock to prove the banner follows
 * the response verdict instead of any local computation.
 */
export const contradictory: SearchFixture = {
  request: {
    method: "POST",
    path: "/api/v1/search",
    body: { ...mnFuzz05.request.body, plate: "CONTRADICT00" },
  },
  response: { ...mnFuzz05.response, verdict: "not_found" },
};
