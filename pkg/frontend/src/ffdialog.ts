/** Fast-forward dialog: pick a bucket and a count, bulk-add the top-scored
 * images, then hand off to the bucket view for the review pass.
 */

import type { ApiClient } from "./api.js";

export interface FfDialogEvents {
  onAdded?: (bucketId: number, added: number[]) => void;
  onError?: (err: unknown) => void;
}

export class FfDialogController {
  open = false;
  bucketId: number | null = null;
  nFf = 25;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly events: FfDialogEvents = {},
  ) {}

  show(bucketId: number): void {
    this.open = true;
    this.bucketId = bucketId;
  }

  hide(): void {
    this.open = false;
    this.bucketId = null;
  }

  setCount(nFf: number): void {
    this.nFf = Math.max(1, Math.floor(nFf));
  }

  /** Run the fast-forward; the review pass opens on the returned ids. */
  async submit(): Promise<void> {
    if (this.bucketId === null) return;
    const bucketId = this.bucketId;
    try {
      const reply = await this.api.fastForward(this.sessionId, bucketId, this.nFf);
      this.hide();
      this.events.onAdded?.(bucketId, reply.added);
    } catch (err) {
      this.events.onError?.(err);
    }
  }
}
