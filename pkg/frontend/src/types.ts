// Wire types mirroring the HTTP API payloads. The UI never computes scores or
// rankings from these; it only renders them.

export interface PassageEvidence {
  passage_id: string;
  text: string;
  score: number;
}

export interface ResultItem {
  rank: number;
  item_id: string;
  name: string;
  score: number;
  passages: PassageEvidence[];
}

export interface Elaboration {
  title: string;
  body: string;
}

export interface Reformulation {
  method: string;
  text: string;
  segments: string[];
  elaborations: Elaboration[];
}

export interface RecommendResponse {
  query: string;
  method: string;
  reformulation: Reformulation;
  results: ResultItem[];
}

export interface ItemDetail {
  item_id: string;
  name: string;
  passages: { passage_id: string; text: string }[];
}

/** Render a score exactly as received, to 3 decimals. No client math. */
export function formatScore(score: number): string {
  return score.toFixed(3);
}
