/** Grid view: a batch of suggestions labeled in place.
 *
 * The analyst picks a bucket, clicks images to label them, and asks for more
 * when done. All labels of a batch travel in a single feedback call; the
 * reply to the follow-up suggest call becomes the next batch. Unlabeled
 * images are simply dropped by the server when the next round starts.
 */

import type { ApiClient } from "./api.js";
import type { Assignments, ImageDoc, Suggestion } from "./types.js";

export interface GridEvents {
  onBatch?: (batch: Suggestion[]) => void;
  onLabel?: (imageId: number, bucketId: number | null) => void;
  onPreview?: (doc: ImageDoc) => void;
  onError?: (err: unknown) => void;
}

export class GridController {
  batch: Suggestion[] = [];
  /** labels staged for the next feedback post */
  pending: Map<number, number> = new Map();
  selectedBucket: number | null = null;
  exhausted = false;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly events: GridEvents = {},
  ) {}

  async loadBatch(perBucket?: number): Promise<void> {
    try {
      const reply = await this.api.suggest(this.sessionId, undefined, perBucket);
      this.batch = reply.suggestions;
      this.exhausted = reply.exhausted;
      this.pending.clear();
      this.events.onBatch?.(this.batch);
    } catch (err) {
      this.events.onError?.(err);
    }
  }

  selectBucket(bucketId: number | null): void {
    this.selectedBucket = bucketId;
  }

  /** Label the image with the selected bucket; a second click unlabels. */
  toggleLabel(imageId: number): void {
    if (this.selectedBucket === null) return;
    if (this.pending.get(imageId) === this.selectedBucket) {
      this.pending.delete(imageId);
      this.events.onLabel?.(imageId, null);
    } else {
      this.pending.set(imageId, this.selectedBucket);
      this.events.onLabel?.(imageId, this.selectedBucket);
    }
  }

  /** Post staged labels (one call), then fetch the next batch (one call). */
  async moreSuggestions(perBucket?: number): Promise<void> {
    try {
      if (this.pending.size > 0) {
        const assignments: Assignments = {};
        for (const [imageId, bucketId] of this.pending) assignments[imageId] = bucketId;
        await this.api.feedback(this.sessionId, assignments);
      }
      await this.loadBatch(perBucket);
    } catch (err) {
      this.events.onError?.(err);
    }
  }

  async preview(imageId: number): Promise<void> {
    try {
      const doc = await this.api.image(imageId);
      this.events.onPreview?.(doc);
    } catch (err) {
      this.events.onError?.(err);
    }
  }
}
