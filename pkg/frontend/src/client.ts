/**
 * Thin JSON client for the projection service. All numbers displayed in the
 * UI come out of these calls; nothing here computes, rounds, or rescales.
 *
 * Edits are serialized: one /modify request is in flight at a time, later
 * gestures queue behind it. A 409 (writer busy) retries the SAME event id so
 * the server-side replay cache can deduplicate; a 422 is surfaced to the
 * caller and never retried.
 */

import type {
  BoxplotResponse,
  DatasetInfo,
  EmbeddingResponse,
  JobStatus,
  LinesResponse,
  ModifyRequest,
  ModifyResponse,
  RecommendResponse,
  ResetResponse,
  SessionStart,
  Side,
  SnapshotResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`service returned ${status}: ${detail}`);
  }
}

export interface ClientOptions {
  /** Delay hook between 409 retries; tests pass an immediate resolve. */
  wait?: (ms: number) => Promise<void>;
  retryDelayMs?: number;
  maxRetries?: number;
}

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class ServiceClient {
  private modifyChain: Promise<unknown> = Promise.resolve();
  private pendingModifies = 0;
  private readonly wait: (ms: number) => Promise<void>;
  private readonly retryDelayMs: number;
  private readonly maxRetries: number;

  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike,
    opts: ClientOptions = {},
  ) {
    this.wait = opts.wait ?? sleep;
    this.retryDelayMs = opts.retryDelayMs ?? 250;
    this.maxRetries = opts.maxRetries ?? 20;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: Parameters<FetchLike>[1] = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    const payload = (await resp.json()) as Record<string, unknown>;
    if (resp.status >= 400) {
      const detail = typeof payload.detail === "string" ? payload.detail : JSON.stringify(payload);
      throw new ServiceError(resp.status, detail);
    }
    return payload as T;
  }

  registerDataset(manifestPath: string): Promise<DatasetInfo> {
    return this.request("POST", "/datasets", { manifest_path: manifestPath });
  }

  startSession(body: Record<string, unknown>): Promise<SessionStart> {
    return this.request("POST", "/sessions", body);
  }

  job(jobId: string): Promise<JobStatus> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  embedding(sessionId: string, side: Side): Promise<EmbeddingResponse> {
    return this.request("GET", `/sessions/${sessionId}/embedding?side=${side}`);
  }

  /**
   * Queue an edit. Resolution order follows call order; each request retries
   * on 409 with an unchanged event_id until the writer frees up.
   */
  modify(sessionId: string, event: ModifyRequest): Promise<ModifyResponse> {
    this.pendingModifies++;
    const settle = () => {
      this.pendingModifies--;
    };
    const run = this.modifyChain.then(
      () => this.modifyOnce(sessionId, event),
      () => this.modifyOnce(sessionId, event),
    );
    run.then(settle, settle);
    this.modifyChain = run.catch(() => undefined);
    return run;
  }

  private async modifyOnce(sessionId: string, event: ModifyRequest): Promise<ModifyResponse> {
    for (let attempt = 0; ; attempt++) {
      try {
        return await this.request<ModifyResponse>("POST", `/sessions/${sessionId}/modify`, event);
      } catch (err) {
        if (err instanceof ServiceError && err.status === 409 && attempt < this.maxRetries) {
          await this.wait(this.retryDelayMs);
          continue;
        }
        throw err;
      }
    }
  }

  /** True while at least one edit is queued or being applied server-side. */
  get busy(): boolean {
    return this.pendingModifies > 0;
  }

  boxplot(sessionId: string, gene: string, trait: string): Promise<BoxplotResponse> {
    const g = encodeURIComponent(gene);
    const t = encodeURIComponent(trait);
    return this.request("GET", `/sessions/${sessionId}/gene/${g}/boxplot?trait=${t}`);
  }

  recommend(sessionId: string, body: Record<string, unknown>): Promise<RecommendResponse> {
    return this.request("POST", `/sessions/${sessionId}/recommend`, body);
  }

  lines(sessionId: string): Promise<LinesResponse> {
    return this.request("GET", `/sessions/${sessionId}/lines`);
  }

  snapshot(sessionId: string): Promise<SnapshotResponse> {
    return this.request("GET", `/sessions/${sessionId}/snapshot`);
  }

  reset(sessionId: string): Promise<ResetResponse> {
    return this.request("POST", `/sessions/${sessionId}/reset`);
  }
}
