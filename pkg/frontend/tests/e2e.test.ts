// @vitest-environment node
/** End-to-end UI conformance against a live service.
 *
 * beforeAll generates a small synthetic collection, builds its index, and
 * boots the real HTTP service; the tests drive the same controllers the
 * browser uses, over real fetch.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { BucketViewController } from "../src/bucketview.js";
import { FfDialogController } from "../src/ffdialog.js";
import { GridController } from "../src/grid.js";
import { TetrisController } from "../src/tetris.js";
import { DISCARD } from "../src/types.js";

const PORT = 8900 + (process.pid % 100);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let work = "";

const api = new ApiClient(BASE);

async function newSession(config: Record<string, unknown> = { extra_explore: 0 }): Promise<string> {
  const created = await api.createSession(config);
  return created.session_id;
}

/** Label a handful of images so bucket 1 has a trained classifier. */
async function seedBucketOne(sid: string): Promise<void> {
  await api.feedback(sid, { 0: 1, 1: 1, 2: 1, 3: 1, 4: 1, 5: 1, 10: DISCARD, 11: DISCARD, 12: DISCARD });
}

async function memberIds(sid: string, bucketId: number): Promise<number[]> {
  const reply = await api.bucketView(sid, bucketId);
  return reply.members.map((m) => m.image_id);
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "bucketeer-e2e-"));
  const data = join(work, "data");
  const index = join(work, "index");
  const run = (args: string[]) => execFileSync("bucketeer", args, { stdio: "pipe" });
  run(["gen-synth", data, "--n", "2000", "--clusters", "4", "--d-abs", "16", "--d-con", "32", "--t", "6", "--seed", "11"]);
  run(["index", "build", "--dataset", data, "--out", index, "--m", "4", "--k-cap", "32", "--seed", "1", "--train-sample", "2000"]);
  server = spawn(
    "bucketeer",
    ["serve", "--dataset", data, "--index", index, "--port", String(PORT), "--sessions-dir", join(work, "sessions")],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  let stderr = "";
  server.stderr?.on("data", (chunk) => (stderr += chunk));
  for (let attempt = 0; attempt < 180; attempt++) {
    try {
      const resp = await fetch(`${BASE}/`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    if (server.exitCode !== null) break;
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error(`service did not come up on ${BASE}\n${stderr}`);
});

afterAll(() => {
  server?.kill();
  if (work) rmSync(work, { recursive: true, force: true });
});

describe("falling-image view against the live service", () => {
  it("auto-commit without steering lands in the suggested bucket", async () => {
    const sid = await newSession();
    await seedBucketOne(sid);
    const session = await api.getSession(sid);

    const tetris = new TetrisController(api, sid);
    await tetris.start(session.buckets);
    const item = tetris.current;
    expect(item).not.toBeNull();
    // a trained bucket with an empty window suggests from its classifier
    expect(item!.suggestion.bucket_id).toBe(1);
    expect(item!.tied).toBe(true);
    expect(item!.lane).toBe(1);
    const imageId = item!.suggestion.image_id;

    tetris.tick(0);
    tetris.tick(10_000);
    await tetris.landing;
    expect(await memberIds(sid, 1)).toContain(imageId);
  });

  it("steering changes the landing bucket", async () => {
    const sid = await newSession();
    await seedBucketOne(sid);
    const second = await api.createBucket(sid, "alt");
    const session = await api.getSession(sid);

    const tetris = new TetrisController(api, sid);
    await tetris.start(session.buckets);
    const imageId = tetris.current!.suggestion.image_id;
    expect(tetris.current!.lane).toBe(1);

    tetris.steer(1);
    expect(tetris.current!.lane).toBe(second.bucket_id);
    tetris.tick(0);
    tetris.tick(10_000);
    await tetris.landing;

    expect(await memberIds(sid, second.bucket_id)).toContain(imageId);
    expect(await memberIds(sid, 1)).not.toContain(imageId);
  });
});

describe("fast-forward review against the live service", () => {
  it("commits on close and discards the reviewed rejects", async () => {
    const sid = await newSession();
    await seedBucketOne(sid);

    const view = new BucketViewController(api, sid);
    let added: number[] = [];
    const dialog = new FfDialogController(api, sid, {
      onAdded: (_bucketId, ids) => (added = ids),
    });
    dialog.show(1);
    dialog.setCount(8);
    await dialog.submit();
    expect(added).toHaveLength(8);

    await view.openView(1, true);
    const flagged = view.members.filter((m) => m.fast_forwarded).map((m) => m.image_id);
    expect(flagged.sort((a, b) => a - b)).toEqual([...added].sort((a, b) => a - b));

    const rejects = added.slice(0, 2);
    view.toggleReject(rejects[0]);
    view.toggleReject(rejects[1]);
    await view.close();
    expect(view.open).toBe(false);

    const discarded = await memberIds(sid, DISCARD);
    expect(discarded).toEqual(expect.arrayContaining(rejects));
    const remaining = await api.bucketView(sid, 1);
    const remainingIds = remaining.members.map((m) => m.image_id);
    for (const id of rejects) expect(remainingIds).not.toContain(id);
    for (const id of added.slice(2)) expect(remainingIds).toContain(id);
    // the review pass is committed: nothing stays flagged
    expect(remaining.members.every((m) => !m.fast_forwarded)).toBe(true);
  });
});

describe("grid labeling against the live service", () => {
  it("round-trips staged labels through the feedback endpoint", async () => {
    const sid = await newSession();
    const before = await api.getSession(sid);

    const grid = new GridController(api, sid);
    await grid.loadBatch(4);
    expect(grid.batch).toHaveLength(4);
    const [a, b, c, d] = grid.batch.map((s) => s.image_id);

    grid.selectBucket(1);
    grid.toggleLabel(a);
    grid.toggleLabel(b);
    grid.selectBucket(DISCARD);
    grid.toggleLabel(c);
    await grid.moreSuggestions(4);

    expect(grid.batch).toHaveLength(4);
    expect(grid.pending.size).toBe(0);
    const kept = await memberIds(sid, 1);
    expect(kept).toEqual(expect.arrayContaining([a, b]));
    expect(await memberIds(sid, DISCARD)).toContain(c);
    expect(kept).not.toContain(c);
    expect(kept).not.toContain(d);

    const after = await api.getSession(sid);
    expect(after.round).toBe(before.round + 2);
    expect(after.buckets.find((x) => x.bucket_id === 1)?.size).toBe(2);
  });
});
