import { describe, expect, it } from "vitest";

import type { ApiClient } from "../src/api.js";
import { TetrisController } from "../src/tetris.js";
import { DISCARD, type Assignments, type BucketDoc, type Suggestion } from "../src/types.js";

function bucket(id: number, over: Partial<BucketDoc> = {}): BucketDoc {
  return { bucket_id: id, name: `b${id}`, color: "#3366cc", active: true, size: 0, archetypes: [], ...over };
}

function sug(imageId: number, bucketId: number | null, confidence: number | null = 0.8): Suggestion {
  return {
    image_id: imageId,
    bucket_id: bucketId,
    source: bucketId === null ? "explorer" : "classifier",
    oracle_flag: false,
    confidence,
  };
}

/** Scripted service: suggest pops one batch per call, feedback is recorded. */
class FakeApi {
  batches: Suggestion[][] = [];
  suggestCalls: Array<Record<number, number> | undefined> = [];
  feedbackCalls: Assignments[] = [];
  imageCalls: number[] = [];
  failFeedback = false;
  private round = 0;

  async suggest(_sid: string, counts?: Record<number, number>) {
    this.suggestCalls.push(counts);
    this.round += 1;
    const suggestions = this.batches.shift() ?? [];
    return { round: this.round, exhausted: suggestions.length === 0, suggestions };
  }

  async feedback(_sid: string, assignments: Assignments) {
    if (this.failFeedback) throw new Error("boom");
    this.feedbackCalls.push(assignments);
    return { retrained: [] };
  }

  async image(imageId: number) {
    this.imageCalls.push(imageId);
    return { image_id: imageId, uri: `synth://t/${imageId}`, metadata: { concepts: [], extra: null } };
  }
}

function make(batches: Suggestion[][], buckets = [bucket(0), bucket(2)]) {
  const api = new FakeApi();
  api.batches = batches;
  const events = { commits: [] as Array<[number, number]>, exhausted: 0, errors: [] as unknown[] };
  const controller = new TetrisController(api as unknown as ApiClient, "s1", {
    onCommit: (imageId, lane) => events.commits.push([imageId, lane]),
    onExhausted: () => (events.exhausted += 1),
    onError: (err) => events.errors.push(err),
  });
  return { api, controller, events, buckets };
}

// speedLevel defaults to 1, a 5000 ms descent

describe("TetrisController", () => {
  it("spawns the suggestion tied above its bucket", async () => {
    const { api, controller, buckets } = make([[sug(10, 2)]]);
    await controller.start(buckets);
    expect(api.suggestCalls[0]).toEqual({ 0: 1 });
    expect(controller.current?.lane).toBe(2);
    expect(controller.current?.tied).toBe(true);
    expect(controller.lanes()).toEqual([0, 2, DISCARD]);
  });

  it("auto-commits to the suggested bucket and prefetches the next", async () => {
    const { api, controller, events, buckets } = make([[sug(10, 2)], [sug(11, 0)]]);
    await controller.start(buckets);
    controller.tick(0);
    controller.tick(3000);
    expect(controller.current?.progress).toBeCloseTo(0.6);
    controller.tick(6000);
    await controller.landing;
    expect(api.feedbackCalls).toEqual([{ 10: 2 }]);
    expect(events.commits).toEqual([[10, 2]]);
    expect(controller.current?.suggestion.image_id).toBe(11);
    expect(api.suggestCalls).toHaveLength(2);
  });

  it("steers between lanes and clamps at both ends", async () => {
    const { api, controller, buckets } = make([[sug(10, 2)]]);
    await controller.start(buckets);
    controller.steer(1);
    expect(controller.current?.lane).toBe(DISCARD);
    controller.steer(1);
    expect(controller.current?.lane).toBe(DISCARD);
    controller.steer(-1);
    controller.steer(-1);
    expect(controller.current?.lane).toBe(0);
    controller.steer(-1);
    expect(controller.current?.lane).toBe(0);
    controller.tick(0);
    controller.tick(5000);
    await controller.landing;
    expect(api.feedbackCalls).toEqual([{ 10: 0 }]);
  });

  it("holds the descent while paused without losing the clock", async () => {
    const { controller, buckets } = make([[sug(10, 2)]]);
    await controller.start(buckets);
    controller.tick(0);
    controller.togglePause();
    controller.tick(5000);
    expect(controller.current?.progress).toBe(0);
    controller.togglePause();
    controller.tick(7500);
    expect(controller.current?.progress).toBeCloseTo(0.5);
  });

  it("maps speed levels onto descent durations", async () => {
    const { controller, buckets } = make([[sug(10, 2)]]);
    await controller.start(buckets);
    controller.speedUp();
    expect(controller.speedLevel).toBe(2);
    controller.tick(0);
    controller.tick(1500);
    expect(controller.current?.progress).toBeCloseTo(0.5);
    controller.speedDown();
    controller.speedDown();
    controller.speedDown();
    expect(controller.speedLevel).toBe(0);
    controller.speedUp();
    controller.speedUp();
    controller.speedUp();
    controller.speedUp();
    expect(controller.speedLevel).toBe(3);
  });

  it("retargets a falling image to discard when its lane deactivates", async () => {
    const { controller, buckets } = make([[sug(10, 2)]]);
    await controller.start(buckets);
    controller.setBuckets([bucket(0), bucket(2, { active: false })]);
    expect(controller.current?.lane).toBe(DISCARD);
    expect(controller.current?.tied).toBe(false);
    expect(controller.lanes()).toEqual([0, DISCARD]);
  });

  it("spawns exploration items untied over the discard pile", async () => {
    const { controller, buckets } = make([[sug(10, null, null)]]);
    await controller.start(buckets);
    expect(controller.current?.lane).toBe(DISCARD);
    expect(controller.current?.tied).toBe(false);
  });

  it("signals exhaustion on an empty batch", async () => {
    const { controller, events, buckets } = make([[]]);
    await controller.start(buckets);
    expect(controller.exhausted).toBe(true);
    expect(controller.current).toBeNull();
    expect(events.exhausted).toBe(1);
  });

  it("holds the descent while the info overlay is open and fetches the doc once", async () => {
    const { api, controller, buckets } = make([[sug(10, 2)]]);
    await controller.start(buckets);
    controller.tick(0);
    await controller.toggleInfo();
    expect(controller.info?.image_id).toBe(10);
    controller.tick(4000);
    expect(controller.current?.progress).toBe(0);
    await controller.toggleInfo();
    await controller.toggleInfo();
    expect(api.imageCalls).toEqual([10]);
  });

  it("reports a failed landing and keeps the flow alive", async () => {
    const { api, controller, events, buckets } = make([[sug(10, 2)], [sug(11, 0)]]);
    await controller.start(buckets);
    api.failFeedback = true;
    controller.tick(0);
    controller.tick(5000);
    await controller.landing;
    expect(events.errors).toHaveLength(1);
    expect(controller.current?.suggestion.image_id).toBe(11);
  });

  it("rotates the requested bucket across rounds", async () => {
    const { api, controller, buckets } = make([[sug(10, 0)], [sug(11, 2)], [sug(12, 0)]]);
    await controller.start(buckets);
    controller.tick(0);
    controller.tick(5000);
    await controller.landing;
    controller.tick(10000);
    controller.tick(15000);
    await controller.landing;
    expect(api.suggestCalls).toEqual([{ 0: 1 }, { 2: 1 }, { 0: 1 }]);
  });
});
