import { describe, expect, it } from "vitest";

import type { ApiClient } from "../src/api.js";
import { FfDialogController } from "../src/ffdialog.js";
import { PanelController } from "../src/panel.js";
import { initialState, setGridSize, setSpeedLevel } from "../src/state.js";
import { DISCARD, type BucketDoc, type SessionDoc } from "../src/types.js";

function bucket(id: number, over: Partial<BucketDoc> = {}): BucketDoc {
  return { bucket_id: id, name: `b${id}`, color: "#3366cc", active: true, size: 0, archetypes: [], ...over };
}

class FakeApi {
  doc: SessionDoc = { session_id: "s1", dataset: "d", round: 0, buckets: [] };
  calls: string[] = [];
  ffAdded: number[] = [];

  async getSession() {
    this.calls.push("get");
    return this.doc;
  }

  async createBucket(_sid: string, name?: string) {
    this.calls.push(`create ${name ?? ""}`);
    return bucket(9, { name: name ?? "b9" });
  }

  async patchBucket(_sid: string, bucketId: number, patch: Record<string, unknown>) {
    this.calls.push(`patch ${bucketId} ${JSON.stringify(patch)}`);
    return bucket(bucketId);
  }

  async deleteBucket(_sid: string, bucketId: number) {
    this.calls.push(`delete ${bucketId}`);
    return { deleted: bucketId };
  }

  async fastForward(_sid: string, bucketId: number, nFf: number) {
    this.calls.push(`ff ${bucketId} ${nFf}`);
    return { added: this.ffAdded };
  }
}

describe("PanelController", () => {
  it("splits buckets into banner and panel sets", async () => {
    const api = new FakeApi();
    api.doc.buckets = [
      bucket(DISCARD, { name: "discard", size: 4 }),
      bucket(2, { active: false }),
      bucket(1),
      bucket(0, { size: 7 }),
    ];
    const panel = new PanelController(api as unknown as ApiClient, "s1");
    await panel.refresh();
    expect(panel.bannerBuckets().map((b) => b.bucket_id)).toEqual([0, 1]);
    expect(panel.panelBuckets().map((b) => b.bucket_id)).toEqual([0, 1, 2]);
    expect(panel.discardSize()).toBe(4);
  });

  it("runs each action as one call plus a refresh", async () => {
    const api = new FakeApi();
    const panel = new PanelController(api as unknown as ApiClient, "s1");
    await panel.createBucket("fresh");
    await panel.renameBucket(1, "renamed");
    await panel.setActive(1, false);
    await panel.deleteBucket(2);
    expect(api.calls).toEqual([
      "create fresh",
      "get",
      'patch 1 {"name":"renamed"}',
      "get",
      'patch 1 {"active":false}',
      "get",
      "delete 2",
      "get",
    ]);
  });

  it("reports action errors without refreshing", async () => {
    const api = new FakeApi();
    api.deleteBucket = async () => {
      throw new Error("nope");
    };
    const errors: unknown[] = [];
    const panel = new PanelController(api as unknown as ApiClient, "s1", {
      onError: (err) => errors.push(err),
    });
    await panel.deleteBucket(1);
    expect(errors).toHaveLength(1);
    expect(api.calls).toEqual([]);
  });
});

describe("FfDialogController", () => {
  it("submits the count and hands the added batch to review", async () => {
    const api = new FakeApi();
    api.ffAdded = [4, 5, 6];
    const added: Array<[number, number[]]> = [];
    const dialog = new FfDialogController(api as unknown as ApiClient, "s1", {
      onAdded: (bucketId, ids) => added.push([bucketId, ids]),
    });
    dialog.show(3);
    dialog.setCount(10.7);
    expect(dialog.nFf).toBe(10);
    dialog.setCount(-5);
    expect(dialog.nFf).toBe(1);
    dialog.setCount(25);
    await dialog.submit();
    expect(api.calls).toEqual(["ff 3 25"]);
    expect(added).toEqual([[3, [4, 5, 6]]]);
    expect(dialog.open).toBe(false);
  });

  it("does nothing without a target bucket", async () => {
    const api = new FakeApi();
    const dialog = new FfDialogController(api as unknown as ApiClient, "s1");
    await dialog.submit();
    expect(api.calls).toEqual([]);
  });
});

describe("view state", () => {
  it("clamps speed and grid size indices", () => {
    const state = initialState();
    expect(setSpeedLevel(state, 99).speedLevel).toBe(3);
    expect(setSpeedLevel(state, -2).speedLevel).toBe(0);
    expect(setGridSize(state, 99).gridSize).toBe(3);
    expect(setGridSize(state, -1).gridSize).toBe(0);
  });
});
