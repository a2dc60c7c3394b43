/** Types mirroring the frozen /api/v1 contract (see ../../contracts/api_v1). */

export const CATEGORIES = ["2-wheeler", "3-wheeler", "4-wheeler", ">4-wheeler"] as const;
export type Category = (typeof CATEGORIES)[number];

export interface SearchRequest {
  type: string;
  plate: string;
  fuzz: number;
  limit: number;
}

export interface SearchMatch {
  record_id: string;
  distance: number;
  category: string;
  plate_text: string | null;
  char_confidences: number[] | null;
  crop_urls: Record<string, string>;
}

export interface QueryEcho {
  type: string;
  plate: string;
  fuzz: number;
  limit: number;
  normalized_plate: string;
  category: string;
  confusable_pairs: [string, string, number][];
}

export interface SearchResponse {
  verdict: "found" | "not_found";
  matches: SearchMatch[];
  query_echo: QueryEcho;
}

export interface RecordPayload {
  record_id: string;
  image_id: string;
  source_path: string;
  ingested_at: string;
  category: string;
  box: number[];
  detection_score: number;
  plate_text: string | null;
  plate_confidence: number | null;
  char_confidences: number[] | null;
  crop_urls: Record<string, string>;
}

export interface RecordsPage {
  total: number;
  offset: number;
  count: number;
  records: RecordPayload[];
}

export interface ApiErrorBody {
  error: { code: string; message: string; field: string | null };
}
