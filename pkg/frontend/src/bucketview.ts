/** Bucket view: the members of one bucket, sortable, 3-per-row or 1-per-row.
 *
 * Also hosts the fast-forward review pass: freshly fast-forwarded members
 * arrive at the top, the analyst marks rejects, and closing the view commits
 * the pass in two calls: rejects move to the discard pile, the review flags
 * of everything else clear.
 */

import type { ApiClient } from "./api.js";
import type { ViewMember } from "./types.js";
import { DISCARD } from "./types.js";

export type ViewSort = "confidence" | "added";
export type ViewOrder = "asc" | "desc";

export interface BucketViewEvents {
  onOpen?: (members: ViewMember[]) => void;
  onClosed?: () => void;
  onError?: (err: unknown) => void;
}

export class BucketViewController {
  bucketId: number | null = null;
  members: ViewMember[] = [];
  reviewMode = false;
  rejects: Set<number> = new Set();
  sort: ViewSort = "confidence";
  order: ViewOrder = "desc";
  /** 3 tiles per row for overview, 1 for detail */
  perRow: 3 | 1 = 3;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly events: BucketViewEvents = {},
  ) {}

  get open(): boolean {
    return this.bucketId !== null;
  }

  async openView(bucketId: number, review = false): Promise<void> {
    this.bucketId = bucketId;
    this.reviewMode = review;
    this.rejects.clear();
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (this.bucketId === null) return;
    try {
      const reply = await this.api.bucketView(this.sessionId, this.bucketId, this.sort, this.order);
      this.members = reply.members;
      this.events.onOpen?.(this.members);
    } catch (err) {
      this.events.onError?.(err);
    }
  }

  async setSort(sort: ViewSort, order: ViewOrder): Promise<void> {
    this.sort = sort;
    this.order = order;
    await this.refresh();
  }

  toggleRowSize(): void {
    this.perRow = this.perRow === 3 ? 1 : 3;
  }

  /** Review only: mark or unmark a member as a reject. */
  toggleReject(imageId: number): void {
    if (!this.reviewMode) return;
    if (this.rejects.has(imageId)) this.rejects.delete(imageId);
    else this.rejects.add(imageId);
  }

  /** Closing commits a review pass; a plain view just closes. */
  async close(): Promise<void> {
    const bucketId = this.bucketId;
    if (bucketId === null) return;
    if (this.reviewMode) {
      // stay open on failure so the marked rejects are not lost
      try {
        if (this.rejects.size > 0) {
          await this.api.transfer(this.sessionId, [...this.rejects], bucketId, DISCARD, "move");
        }
        await this.api.commitReview(this.sessionId, bucketId);
      } catch (err) {
        this.events.onError?.(err);
        return;
      }
    }
    this.bucketId = null;
    this.members = [];
    this.reviewMode = false;
    this.rejects.clear();
    this.events.onClosed?.();
  }
}
