import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

type FetchArgs = { url: string; method: string; body: Record<string, unknown> | null };

/** Scripted fetch stub: pops one canned reply per call and logs the request. */
function scriptedFetch(replies: Array<{ status: number; body: unknown }>) {
  const calls: FetchArgs[] = [];
  const fn = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const reply = replies.shift() ?? { status: 200, body: {} };
    calls.push({
      url: String(input),
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : null,
    });
    return new Response(JSON.stringify(reply.body), { status: reply.status });
  });
  return { fn: fn as unknown as typeof fetch, calls };
}

describe("ApiClient", () => {
  it("maps error payloads to ApiError", async () => {
    const { fn } = scriptedFetch([{ status: 404, body: { detail: "unknown session" } }]);
    const api = new ApiClient("http://x", fn);
    const err = await api.getSession("nope").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    expect(err.detail).toBe("unknown session");
  });

  it("retries a busy mutation with the same request id", async () => {
    const { fn, calls } = scriptedFetch([
      { status: 409, body: { detail: "busy" } },
      { status: 409, body: { detail: "busy" } },
      { status: 200, body: { retrained: [1] } },
    ]);
    const api = new ApiClient("", fn);
    const reply = await api.feedback("s1", { 5: 1 });
    expect(reply.retrained).toEqual([1]);
    expect(calls).toHaveLength(3);
    const ids = calls.map((c) => c.body?.request_id);
    expect(new Set(ids).size).toBe(1);
    expect(typeof ids[0]).toBe("string");
  });

  it("serializes mutations through one in-flight slot", async () => {
    const order: string[] = [];
    let release: (() => void) | null = null;
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    const fn = (async (input: RequestInfo | URL) => {
      const url = String(input);
      order.push(`start ${url}`);
      if (url.endsWith("/suggest")) await gate;
      order.push(`end ${url}`);
      return new Response("{}", { status: 200 });
    }) as typeof fetch;
    const api = new ApiClient("", fn);
    const first = api.suggest("s1");
    const second = api.feedback("s1", { 1: 0 });
    await Promise.resolve();
    expect(order).toEqual(["start /sessions/s1/suggest"]);
    release!();
    await Promise.all([first, second]);
    expect(order).toEqual([
      "start /sessions/s1/suggest",
      "end /sessions/s1/suggest",
      "start /sessions/s1/feedback",
      "end /sessions/s1/feedback",
    ]);
  });

  it("keeps the queue alive after a failed mutation", async () => {
    const { fn, calls } = scriptedFetch([
      { status: 422, body: { detail: "bad" } },
      { status: 200, body: { retrained: [] } },
    ]);
    const api = new ApiClient("", fn);
    await expect(api.feedback("s1", { 1: -7 })).rejects.toThrow("bad");
    await expect(api.feedback("s1", { 1: 0 })).resolves.toEqual({ retrained: [] });
    expect(calls).toHaveLength(2);
  });

  it("builds suggest bodies for both count forms", async () => {
    const { fn, calls } = scriptedFetch([
      { status: 200, body: { round: 1, exhausted: false, suggestions: [] } },
      { status: 200, body: { round: 2, exhausted: false, suggestions: [] } },
    ]);
    const api = new ApiClient("", fn);
    await api.suggest("s1", { 0: 3 });
    await api.suggest("s1", undefined, 5);
    expect(calls[0].body).toMatchObject({ counts: { 0: 3 } });
    expect(calls[0].body).not.toHaveProperty("per_bucket_count");
    expect(calls[1].body).toMatchObject({ per_bucket_count: 5 });
  });

  it("routes transfer and fast-forward payloads", async () => {
    const { fn, calls } = scriptedFetch([
      { status: 200, body: { retrained: [] } },
      { status: 200, body: { added: [9, 8] } },
    ]);
    const api = new ApiClient("", fn);
    await api.transfer("s1", [4, 5], 1, -1);
    await api.fastForward("s1", 2, 10);
    expect(calls[0].url).toBe("/sessions/s1/buckets/transfer");
    expect(calls[0].body).toMatchObject({ ids: [4, 5], from: 1, to: -1, mode: "move" });
    expect(calls[1].body).toMatchObject({ bucket_id: 2, n_ff: 10 });
  });
});
