/** Control panel and bucket banner logic: bucket lifecycle plus the
 * fast-forward entry point. Rendering is a pure function of the session doc;
 * every action is one API call followed by a session refresh.
 */

import type { ApiClient } from "./api.js";
import type { BucketDoc, SessionDoc } from "./types.js";
import { DISCARD } from "./types.js";

export interface PanelEvents {
  onSession?: (doc: SessionDoc) => void;
  onError?: (err: unknown) => void;
}

export class PanelController {
  session: SessionDoc | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly events: PanelEvents = {},
  ) {}

  /** Buckets shown in the banner: active, discard excluded. */
  bannerBuckets(): BucketDoc[] {
    if (!this.session) return [];
    return this.session.buckets
      .filter((b) => b.active && b.bucket_id !== DISCARD)
      .sort((a, b) => a.bucket_id - b.bucket_id);
  }

  /** All user buckets for the panel, discard excluded, inactive grayed. */
  panelBuckets(): BucketDoc[] {
    if (!this.session) return [];
    return this.session.buckets
      .filter((b) => b.bucket_id !== DISCARD)
      .sort((a, b) => a.bucket_id - b.bucket_id);
  }

  discardSize(): number {
    const discard = this.session?.buckets.find((b) => b.bucket_id === DISCARD);
    return discard?.size ?? 0;
  }

  async refresh(): Promise<void> {
    try {
      this.session = await this.api.getSession(this.sessionId);
      this.events.onSession?.(this.session);
    } catch (err) {
      this.events.onError?.(err);
    }
  }

  private async act(fn: () => Promise<unknown>): Promise<void> {
    try {
      await fn();
    } catch (err) {
      this.events.onError?.(err);
      return;
    }
    await this.refresh();
  }

  createBucket(name?: string): Promise<void> {
    return this.act(() => this.api.createBucket(this.sessionId, name));
  }

  renameBucket(bucketId: number, name: string): Promise<void> {
    return this.act(() => this.api.patchBucket(this.sessionId, bucketId, { name }));
  }

  setActive(bucketId: number, active: boolean): Promise<void> {
    return this.act(() => this.api.patchBucket(this.sessionId, bucketId, { active }));
  }

  deleteBucket(bucketId: number): Promise<void> {
    return this.act(() => this.api.deleteBucket(this.sessionId, bucketId));
  }
}
