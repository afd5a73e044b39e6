/** Falling-image view: one suggestion at a time descends toward a bucket.
 *
 * The image spawns above its suggested bucket (or above the discard pile,
 * with no connecting line, for exploration items). Arrow keys steer it
 * between lanes, space pauses, up/down change the descent speed. Landing
 * commits the assignment to the server and the next suggestion is requested
 * while the landed tile settles, so the round trip hides inside the
 * animation. Steering never touches anything already committed.
 */

import type { ApiClient } from "./api.js";
import type { BucketDoc, ImageDoc, Suggestion } from "./types.js";
import { DISCARD } from "./types.js";
import { SPEED_LEVELS_MS } from "./state.js";

export interface FallingItem {
  suggestion: Suggestion;
  /** current landing target (bucket id or DISCARD) */
  lane: number;
  /** draw the colored connecting line to the suggested bucket */
  tied: boolean;
  /** 0 at the top, 1 on landing */
  progress: number;
}

export interface TetrisEvents {
  onSpawn?: (item: FallingItem) => void;
  onMove?: (item: FallingItem) => void;
  onCommit?: (imageId: number, lane: number) => void;
  onExhausted?: () => void;
  onError?: (err: unknown) => void;
}

export class TetrisController {
  current: FallingItem | null = null;
  paused = false;
  speedLevel = 1;
  infoOpen = false;
  info: ImageDoc | null = null;
  exhausted = false;
  /** resolves when the in-progress landing (commit + next fetch) settles */
  landing: Promise<void> | null = null;

  private buckets: BucketDoc[] = [];
  private rotation = 0;
  private lastNow: number | null = null;
  private fetching = false;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly events: TetrisEvents = {},
  ) {}

  /** Active buckets in display order, discard pile last. */
  lanes(): number[] {
    const active = this.buckets
      .filter((b) => b.active && b.bucket_id !== DISCARD)
      .map((b) => b.bucket_id)
      .sort((a, b) => a - b);
    return [...active, DISCARD];
  }

  setBuckets(buckets: BucketDoc[]): void {
    this.buckets = buckets;
    // a bucket deactivated mid-fall re-targets its image to the discard pile
    if (this.current && this.current.lane !== DISCARD && !this.lanes().includes(this.current.lane)) {
      this.current.lane = DISCARD;
      this.current.tied = false;
      this.events.onMove?.(this.current);
    }
  }

  async start(buckets: BucketDoc[]): Promise<void> {
    this.setBuckets(buckets);
    await this.fetchNext();
  }

  /** Request one suggestion for the next bucket in the rotation. */
  private async fetchNext(): Promise<void> {
    if (this.fetching || this.exhausted) return;
    this.fetching = true;
    try {
      const active = this.lanes().filter((lane) => lane !== DISCARD);
      const target = active[this.rotation % active.length];
      this.rotation += 1;
      const reply = await this.api.suggest(this.sessionId, { [target]: 1 });
      const suggestion = reply.suggestions[0];
      if (!suggestion) {
        this.exhausted = true;
        this.events.onExhausted?.();
        return;
      }
      this.spawn(suggestion);
    } catch (err) {
      this.events.onError?.(err);
    } finally {
      this.fetching = false;
    }
  }

  private spawn(suggestion: Suggestion): void {
    const tied = suggestion.bucket_id !== null;
    this.current = {
      suggestion,
      lane: suggestion.bucket_id ?? DISCARD,
      tied,
      progress: 0,
    };
    this.lastNow = null;
    this.infoOpen = false;
    this.info = null;
    this.events.onSpawn?.(this.current);
  }

  /** Advance the descent; call from requestAnimationFrame or a test clock. */
  tick(nowMs: number): void {
    if (!this.current) return;
    if (this.lastNow === null) {
      this.lastNow = nowMs;
      return;
    }
    const dt = nowMs - this.lastNow;
    this.lastNow = nowMs;
    if (this.paused || this.infoOpen) return;
    this.current.progress += dt / SPEED_LEVELS_MS[this.speedLevel];
    if (this.current.progress >= 1) {
      this.landing = this.land();
    } else {
      this.events.onMove?.(this.current);
    }
  }

  private async land(): Promise<void> {
    const item = this.current;
    if (!item) return;
    this.current = null;
    try {
      await this.api.feedback(this.sessionId, { [item.suggestion.image_id]: item.lane });
      this.events.onCommit?.(item.suggestion.image_id, item.lane);
    } catch (err) {
      this.events.onError?.(err);
    }
    await this.fetchNext();
  }

  /** Move the falling image one lane left (-1) or right (+1). */
  steer(direction: -1 | 1): void {
    if (!this.current) return;
    const lanes = this.lanes();
    const index = lanes.indexOf(this.current.lane);
    const next = Math.min(lanes.length - 1, Math.max(0, index + direction));
    if (next !== index) {
      this.current.lane = lanes[next];
      this.events.onMove?.(this.current);
    }
  }

  togglePause(): void {
    this.paused = !this.paused;
  }

  speedUp(): void {
    this.speedLevel = Math.min(SPEED_LEVELS_MS.length - 1, this.speedLevel + 1);
  }

  speedDown(): void {
    this.speedLevel = Math.max(0, this.speedLevel - 1);
  }

  /** Toggle the metadata overlay; descent holds while it is open. */
  async toggleInfo(): Promise<void> {
    this.infoOpen = !this.infoOpen;
    if (this.infoOpen && this.current && !this.info) {
      try {
        this.info = await this.api.image(this.current.suggestion.image_id);
      } catch {
        this.info = null;
      }
    }
  }

  handleKey(key: string): boolean {
    switch (key) {
      case "ArrowLeft":
        this.steer(-1);
        return true;
      case "ArrowRight":
        this.steer(1);
        return true;
      case " ":
      case "Space":
        this.togglePause();
        return true;
      case "ArrowUp":
        this.speedUp();
        return true;
      case "ArrowDown":
        this.speedDown();
        return true;
      case "i":
      case "I":
        void this.toggleInfo();
        return true;
      default:
        return false;
    }
  }
}
