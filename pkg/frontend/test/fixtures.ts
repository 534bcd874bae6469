/** Typed access to the recorded service fixtures (see tools/record_fixtures.py). */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type {
  BoxplotResponse,
  ColPoint,
  DatasetInfo,
  JobStatus,
  LinesResponse,
  ModifyRequest,
  ModifyResponse,
  RecommendResponse,
  ResetResponse,
  RowPoint,
  SessionStart,
  SnapshotResponse,
} from "../src/types.js";

export interface FixtureBundle {
  dataset: DatasetInfo;
  dataset_gene: string;
  session_start: SessionStart;
  job: JobStatus;
  embedding_rows: { side: "rows"; points: RowPoint[] };
  embedding_cols: { side: "cols"; points: ColPoint[] };
  embedding_rows_with_recs: { side: "rows"; points: RowPoint[] };
  lasso_polygon: Array<[number, number]>;
  modify_move_request: ModifyRequest;
  modify_move_response: ModifyResponse;
  modify_move_replay: ModifyResponse;
  modify_scale_request: ModifyRequest;
  modify_scale_response: ModifyResponse;
  modify_out_request: ModifyRequest;
  modify_out_response: ModifyResponse;
  modify_back_request: ModifyRequest;
  modify_back_response: ModifyResponse;
  modify_invalid: { request: ModifyRequest; status: number; body: { detail: string } };
  boxplot: BoxplotResponse;
  boxplot_empty_group: BoxplotResponse | null;
  recommend: RecommendResponse;
  lines: LinesResponse;
  snapshot: SnapshotResponse;
  reset: ResetResponse;
}

const here = dirname(fileURLToPath(import.meta.url));

export const fixtures: FixtureBundle = JSON.parse(
  readFileSync(join(here, "fixtures", "service.json"), "utf8"),
);
