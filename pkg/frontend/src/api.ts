/** Typed client for the session service.
 *
 * Every mutation goes through a single-flight queue: the server allows one
 * in-flight mutation per session, so the client serializes them and retries
 * 409s with the same request id (the server replays the stored reply).
 */

import type {
  Assignments,
  BucketDoc,
  ImageDoc,
  SessionDoc,
  SuggestReply,
  ViewReply,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

const BUSY_RETRY_MS = 250;
const BUSY_RETRIES = 20;

const newRequestId = (): string =>
  typeof crypto !== "undefined" && "randomUUID" in crypto
    ? crypto.randomUUID()
    : `${Date.now()}-${Math.random().toString(36).slice(2)}`;

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class ApiClient {
  private mutationChain: Promise<unknown> = Promise.resolve();

  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail = (payload as { detail?: string }).detail ?? resp.statusText;
      throw new ApiError(resp.status, detail);
    }
    return payload as T;
  }

  /** Serialize mutations; a 409 is retried with the same request id. */
  private mutate<T>(path: string, body: Record<string, unknown>): Promise<T> {
    const requestId = newRequestId();
    const run = async (): Promise<T> => {
      for (let attempt = 0; ; attempt++) {
        try {
          return await this.request<T>("POST", path, { ...body, request_id: requestId });
        } catch (err) {
          if (err instanceof ApiError && err.status === 409 && attempt < BUSY_RETRIES) {
            await sleep(BUSY_RETRY_MS);
            continue;
          }
          throw err;
        }
      }
    };
    const next = this.mutationChain.then(run, run);
    this.mutationChain = next.catch(() => undefined);
    return next;
  }

  // ---- session ----

  createSession(config: Record<string, unknown> = {}): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", { config });
  }

  getSession(sid: string): Promise<SessionDoc> {
    return this.request("GET", `/sessions/${sid}`);
  }

  suggest(sid: string, counts?: Record<number, number>, perBucket?: number): Promise<SuggestReply> {
    const body: Record<string, unknown> = {};
    if (counts !== undefined) body.counts = counts;
    if (perBucket !== undefined) body.per_bucket_count = perBucket;
    return this.mutate(`/sessions/${sid}/suggest`, body);
  }

  feedback(sid: string, assignments: Assignments): Promise<{ retrained: number[] }> {
    return this.mutate(`/sessions/${sid}/feedback`, { assignments });
  }

  fastForward(sid: string, bucketId: number, nFf: number): Promise<{ added: number[] }> {
    return this.mutate(`/sessions/${sid}/fast-forward`, { bucket_id: bucketId, n_ff: nFf });
  }

  // ---- buckets ----

  createBucket(sid: string, name?: string, color?: string): Promise<BucketDoc> {
    const body: Record<string, unknown> = {};
    if (name !== undefined) body.name = name;
    if (color !== undefined) body.color = color;
    return this.mutate(`/sessions/${sid}/buckets`, body);
  }

  async patchBucket(
    sid: string,
    bucketId: number,
    patch: { name?: string; color?: string; active?: boolean },
  ): Promise<BucketDoc> {
    return this.request("PATCH", `/sessions/${sid}/buckets/${bucketId}`, patch);
  }

  async deleteBucket(sid: string, bucketId: number): Promise<{ deleted: number }> {
    return this.request("DELETE", `/sessions/${sid}/buckets/${bucketId}`);
  }

  transfer(
    sid: string,
    ids: number[],
    from: number,
    to: number,
    mode: "move" | "copy" = "move",
  ): Promise<{ retrained: number[] }> {
    return this.mutate(`/sessions/${sid}/buckets/transfer`, { ids, from, to, mode });
  }

  commitReview(sid: string, bucketId: number): Promise<{ cleared: number }> {
    return this.mutate(`/sessions/${sid}/buckets/${bucketId}/commit-review`, {});
  }

  bucketView(
    sid: string,
    bucketId: number,
    sort: "confidence" | "added" = "confidence",
    order: "asc" | "desc" = "desc",
  ): Promise<ViewReply> {
    return this.request("GET", `/sessions/${sid}/buckets/${bucketId}/view?sort=${sort}&order=${order}`);
  }

  // ---- images ----

  image(imageId: number): Promise<ImageDoc> {
    return this.request("GET", `/images/${imageId}`);
  }
}
