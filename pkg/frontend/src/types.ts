/**
 * Wire types for the dualproj session service.
 *
 * These mirror the server's JSON payloads field for field. The client never
 * derives its own numbers from raw data; everything rendered traces back to
 * one of these shapes.
 */

export type Side = "rows" | "cols";

/** One scatterplot point as served by /embedding, /modify, and /reset. */
export interface RowPoint {
  id: string;
  x: number;
  y: number;
  weight: number;
  /** Server-clamped weight used for glyph sizing. */
  display_weight: number;
  traits: Record<string, number>;
  recommended: boolean;
}

export interface ColPoint {
  id: string;
  x: number;
  y: number;
  weight: number;
  display_weight: number;
  chromosome: number;
  position: number;
  recommended: boolean;
}

export interface EmbeddingResponse {
  side: Side;
  points: RowPoint[] | ColPoint[];
}

/** Body of POST /sessions/{id}/modify. Field order matters only for humans. */
export interface ModifyRequest {
  event_id: string;
  side: Side;
  indices: number[];
  kind: "move" | "scale";
  delta?: [number, number];
  factor?: number;
  center?: "centroid" | [number, number];
}

export interface ModifyResponse {
  event_id: string;
  elapsed_ms: number;
  rows: RowPoint[];
  cols: ColPoint[];
}

export interface JobStatus {
  id: string;
  dataset_id: string;
  session_id: string;
  status: "queued" | "running" | "done" | "failed";
  error: string | null;
  result: {
    session_id: string;
    metrics: Record<Side, { k: number; T: number; C: number }>;
    checksums: Record<string, string>;
  } | null;
}

export interface DatasetInfo {
  id: string;
  fingerprint: string;
  name: string;
  n_hybrids: number;
  n_genes: number;
  traits: string[];
}

export interface SessionStart {
  job_id: string;
  session_id: string;
}

/** Tukey five-number summary per genotype group; empty groups carry count 0. */
export interface BoxplotGroup {
  count: number;
  median?: number;
  q1?: number;
  q3?: number;
  whisker_low?: number;
  whisker_high?: number;
  outliers?: number[];
}

export interface BoxplotResponse {
  gene: string;
  trait: string;
  groups: Record<string, BoxplotGroup>;
}

export interface ParentPoint {
  id: string;
  /** Server-computed 1-D coordinate; the client sorts by `order` only. */
  t1d: number;
  order: number;
}

export interface LineLink {
  paternal: string;
  maternal: string;
  kind: "cultivated" | "recommended";
  score?: number;
  predicted_traits?: Record<string, number>;
}

export interface LinesResponse {
  parents: ParentPoint[];
  links: LineLink[];
}

export interface RecommendedCross {
  paternal: string;
  maternal: string;
  score: number;
  predicted_traits: Record<string, number>;
  x: number;
  y: number;
}

export interface RecommendResponse {
  selected: RecommendedCross[];
  objective: number;
  gamma: number;
  converged: boolean;
  pool_size: number;
}

export interface ResetResponse {
  session_id: string;
  rows: RowPoint[];
  cols: ColPoint[];
}

export interface SnapshotResponse {
  session_id: string;
  dataset_id: string;
  created: string;
  modified: string;
  metrics: Record<string, unknown>;
  recommended: unknown[];
  fingerprint: string;
  n_hybrids: number;
  n_genes: number;
  history: unknown[];
}

export interface ApiError {
  status: number;
  detail: string;
}

export function isColPoint(p: RowPoint | ColPoint): p is ColPoint {
  return (p as ColPoint).chromosome !== undefined;
}
