import { describe, expect, it } from "vitest";

import type { ApiClient } from "../src/api.js";
import { GridController } from "../src/grid.js";
import { DISCARD, type Assignments, type Suggestion } from "../src/types.js";

function sug(imageId: number, bucketId: number | null): Suggestion {
  return {
    image_id: imageId,
    bucket_id: bucketId,
    source: bucketId === null ? "explorer" : "classifier",
    oracle_flag: false,
    confidence: bucketId === null ? null : 0.5,
  };
}

class FakeApi {
  batches: Suggestion[][] = [];
  suggestCalls: Array<{ counts?: Record<number, number>; perBucket?: number }> = [];
  feedbackCalls: Assignments[] = [];
  private round = 0;

  async suggest(_sid: string, counts?: Record<number, number>, perBucket?: number) {
    this.suggestCalls.push({ counts, perBucket });
    this.round += 1;
    const suggestions = this.batches.shift() ?? [];
    return { round: this.round, exhausted: suggestions.length === 0, suggestions };
  }

  async feedback(_sid: string, assignments: Assignments) {
    this.feedbackCalls.push(assignments);
    return { retrained: [] };
  }

  async image(imageId: number) {
    return { image_id: imageId, uri: `synth://g/${imageId}`, metadata: { concepts: [], extra: null } };
  }
}

function make(batches: Suggestion[][]) {
  const api = new FakeApi();
  api.batches = batches;
  const labels: Array<[number, number | null]> = [];
  const controller = new GridController(api as unknown as ApiClient, "s1", {
    onLabel: (imageId, bucketId) => labels.push([imageId, bucketId]),
  });
  return { api, controller, labels };
}

describe("GridController", () => {
  it("loads a batch with the requested per-bucket count", async () => {
    const { api, controller } = make([[sug(1, 0), sug(2, 0), sug(3, null)]]);
    await controller.loadBatch(3);
    expect(api.suggestCalls).toEqual([{ counts: undefined, perBucket: 3 }]);
    expect(controller.batch.map((s) => s.image_id)).toEqual([1, 2, 3]);
  });

  it("stages labels against the selected bucket and unlabels on a second click", () => {
    const { controller, labels } = make([]);
    controller.toggleLabel(7);
    expect(labels).toEqual([]);
    controller.selectBucket(2);
    controller.toggleLabel(7);
    controller.toggleLabel(8);
    controller.toggleLabel(7);
    expect(controller.pending.get(8)).toBe(2);
    expect(controller.pending.has(7)).toBe(false);
    expect(labels).toEqual([
      [7, 2],
      [8, 2],
      [7, null],
    ]);
  });

  it("relabeling with a different bucket overwrites the stage", () => {
    const { controller } = make([]);
    controller.selectBucket(1);
    controller.toggleLabel(7);
    controller.selectBucket(DISCARD);
    controller.toggleLabel(7);
    expect(controller.pending.get(7)).toBe(DISCARD);
  });

  it("posts all staged labels in one feedback call, then fetches the next batch", async () => {
    const { api, controller } = make([[sug(1, 0), sug(2, 0), sug(3, null)], [sug(4, 0)]]);
    await controller.loadBatch(3);
    controller.selectBucket(0);
    controller.toggleLabel(1);
    controller.toggleLabel(3);
    controller.selectBucket(DISCARD);
    controller.toggleLabel(2);
    await controller.moreSuggestions(3);
    expect(api.feedbackCalls).toEqual([{ 1: 0, 2: DISCARD, 3: 0 }]);
    expect(controller.batch.map((s) => s.image_id)).toEqual([4]);
    expect(controller.pending.size).toBe(0);
  });

  it("skips the feedback call when nothing was labeled", async () => {
    const { api, controller } = make([[sug(1, 0)], [sug(2, 0)]]);
    await controller.loadBatch();
    await controller.moreSuggestions();
    expect(api.feedbackCalls).toEqual([]);
    expect(api.suggestCalls).toHaveLength(2);
  });

  it("flags exhaustion from an empty reply", async () => {
    const { controller } = make([[]]);
    await controller.loadBatch();
    expect(controller.exhausted).toBe(true);
  });
});
