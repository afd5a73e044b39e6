/** Composition root: builds the page skeleton, wires controllers to DOM
 * events, and keeps the render in sync with the session document. All state
 * that matters lives on the server; this file only draws it.
 */

import { ApiClient, ApiError } from "./api.js";
import { confidenceBorder, placeholderFill } from "./color.js";
import { BucketViewController } from "./bucketview.js";
import { FfDialogController } from "./ffdialog.js";
import { GridController } from "./grid.js";
import { PanelController } from "./panel.js";
import { TetrisController } from "./tetris.js";
import { GRID_SIZES, SPEED_LEVELS_MS, type Mode } from "./state.js";
import { DISCARD, type BucketDoc, type ImageDoc, type Suggestion } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

const NEUTRAL_BORDER = "hsl(0, 0%, 45%)";

export class App {
  mode: Mode = "grid";
  gridSizeIdx = 1;

  readonly panel: PanelController;
  readonly tetris: TetrisController;
  readonly grid: GridController;
  readonly view: BucketViewController;
  readonly ff: FfDialogController;

  private readonly banner: HTMLElement;
  private readonly statusBar: HTMLElement;
  private readonly main: HTMLElement;
  private readonly panelEl: HTMLElement;
  private readonly overlay: HTMLElement;
  private readonly toast: HTMLElement;
  private rafHandle: number | null = null;
  private toastTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(root: HTMLElement, api: ApiClient, readonly sessionId: string) {
    this.banner = el("div", "banner");
    this.statusBar = el("div", "status-bar");
    this.main = el("div", "main");
    this.panelEl = el("div", "panel");
    this.overlay = el("div", "overlay hidden");
    this.toast = el("div", "toast hidden");

    const body = el("div", "layout");
    body.append(this.main, this.panelEl);
    root.replaceChildren(this.banner, this.statusBar, body, this.overlay, this.toast);

    const onError = (err: unknown) => this.showError(err);

    this.panel = new PanelController(api, sessionId, {
      onSession: () => this.renderChrome(),
      onError,
    });
    this.tetris = new TetrisController(api, sessionId, {
      onSpawn: () => this.renderFalling(),
      onMove: () => this.renderFalling(),
      onCommit: () => void this.panel.refresh(),
      onExhausted: () => this.renderStatus(),
      onError,
    });
    this.grid = new GridController(api, sessionId, {
      onBatch: () => this.renderGrid(),
      onLabel: () => this.renderGrid(),
      onPreview: (doc) => this.showImageOverlay(doc),
      onError,
    });
    this.view = new BucketViewController(api, sessionId, {
      onOpen: () => this.renderBucketView(),
      onClosed: () => {
        this.hideOverlay();
        void this.panel.refresh();
      },
      onError,
    });
    this.ff = new FfDialogController(api, sessionId, {
      onAdded: (bucketId) => {
        this.hideOverlay();
        void this.panel.refresh();
        void this.view.openView(bucketId, true).then(() => this.renderBucketView());
      },
      onError,
    });

    window.addEventListener("keydown", (event) => this.onKey(event));
  }

  /** Create or resume a session, then land in the default view. */
  static async boot(root: HTMLElement, api = new ApiClient()): Promise<App> {
    let sessionId = window.location.hash.replace(/^#/, "");
    if (sessionId) {
      try {
        await api.getSession(sessionId);
      } catch {
        sessionId = "";
      }
    }
    if (!sessionId) {
      const created = await api.createSession({});
      sessionId = created.session_id;
      window.location.hash = sessionId;
    }
    const app = new App(root, api, sessionId);
    await app.panel.refresh();
    await app.setMode("grid");
    return app;
  }

  // ---- mode switching ----

  async setMode(mode: Mode): Promise<void> {
    this.mode = mode;
    if (mode === "tetris") {
      this.main.replaceChildren(this.buildTetrisStage());
      if (!this.tetris.current && !this.tetris.exhausted) {
        await this.tetris.start(this.panel.session?.buckets ?? []);
      }
      this.startLoop();
    } else {
      this.stopLoop();
      this.main.replaceChildren(this.buildGridStage());
      if (this.grid.batch.length === 0 && !this.grid.exhausted) {
        await this.grid.loadBatch(this.perBucketCount());
      }
    }
    this.renderChrome();
  }

  private perBucketCount(): number {
    const active = Math.max(1, this.panel.bannerBuckets().length);
    return Math.max(1, Math.floor(GRID_SIZES[this.gridSizeIdx] / active));
  }

  private startLoop(): void {
    if (this.rafHandle !== null) return;
    const step = (now: number) => {
      this.tetris.tick(now);
      this.renderFalling();
      this.rafHandle = requestAnimationFrame(step);
    };
    this.rafHandle = requestAnimationFrame(step);
  }

  private stopLoop(): void {
    if (this.rafHandle !== null) {
      cancelAnimationFrame(this.rafHandle);
      this.rafHandle = null;
    }
  }

  // ---- keyboard ----

  private onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "SELECT")) return;
    if (event.key === "Escape" && !this.overlay.classList.contains("hidden")) {
      if (this.view.open) void this.view.close();
      else this.hideOverlay();
      event.preventDefault();
      return;
    }
    if (this.mode === "tetris" && this.overlay.classList.contains("hidden")) {
      if (this.tetris.handleKey(event.key)) {
        event.preventDefault();
        this.renderStatus();
        if (this.tetris.infoOpen && this.tetris.info) this.showImageOverlay(this.tetris.info);
        else if (!this.tetris.infoOpen) this.hideOverlay();
      }
    }
  }

  // ---- chrome: banner, status, panel ----

  private renderChrome(): void {
    this.renderBanner();
    this.renderStatus();
    this.renderPanel();
    this.tetris.setBuckets(this.panel.session?.buckets ?? []);
    if (this.grid.selectedBucket !== null) {
      const stillActive = this.panel.bannerBuckets().some((b) => b.bucket_id === this.grid.selectedBucket);
      if (!stillActive) this.grid.selectBucket(null);
    }
    if (this.mode === "grid") this.renderGrid();
    else this.renderLanes();
  }

  private renderBanner(): void {
    this.banner.replaceChildren();
    for (const bucket of this.panel.bannerBuckets()) {
      const chip = el("button", "chip", "");
      chip.classList.toggle("selected", this.grid.selectedBucket === bucket.bucket_id);
      const dot = el("span", "dot");
      dot.style.background = bucket.color;
      chip.append(dot, el("span", "", bucket.name), el("span", "count", String(bucket.size)));
      chip.addEventListener("click", () => {
        this.grid.selectBucket(this.grid.selectedBucket === bucket.bucket_id ? null : bucket.bucket_id);
        this.renderBanner();
        this.renderGrid();
      });
      this.banner.append(chip);
    }
    const discard = el("span", "chip discard", `discard ${this.panel.discardSize()}`);
    this.banner.append(discard);
  }

  private renderStatus(): void {
    this.statusBar.replaceChildren();
    const session = this.panel.session;
    const left = el("span", "", session ? `${session.dataset} · round ${session.round}` : "loading");
    const modeBox = el("span", "mode-switch");
    for (const mode of ["grid", "tetris"] as const) {
      const button = el("button", this.mode === mode ? "on" : "", mode);
      button.addEventListener("click", () => void this.setMode(mode));
      modeBox.append(button);
    }
    const right = el("span", "status-right");
    if (this.mode === "tetris") {
      const seconds = SPEED_LEVELS_MS[this.tetris.speedLevel] / 1000;
      right.textContent = this.tetris.exhausted
        ? "collection exhausted"
        : `${seconds}s drop${this.tetris.paused ? " · paused" : ""}`;
    } else {
      const size = el("select") as HTMLSelectElement;
      GRID_SIZES.forEach((n, index) => {
        const option = el("option", "", String(n));
        option.value = String(index);
        option.selected = index === this.gridSizeIdx;
        size.append(option);
      });
      size.addEventListener("change", () => {
        this.gridSizeIdx = Number(size.value);
      });
      right.append(el("span", "", "grid "), size);
      if (this.grid.exhausted) right.append(el("span", "", " · collection exhausted"));
    }
    this.statusBar.append(left, modeBox, right);
  }

  private renderPanel(): void {
    this.panelEl.replaceChildren(el("h2", "", "buckets"));
    for (const bucket of this.panel.panelBuckets()) {
      this.panelEl.append(this.buildPanelRow(bucket));
    }
    const add = el("button", "add-bucket", "+ bucket");
    add.addEventListener("click", () => void this.panel.createBucket());
    this.panelEl.append(add);
  }

  private buildPanelRow(bucket: BucketDoc): HTMLElement {
    const row = el("div", bucket.active ? "bucket-row" : "bucket-row inactive");
    const dot = el("span", "dot");
    dot.style.background = bucket.color;
    const name = el("span", "name", `${bucket.name} (${bucket.size})`);
    name.title = "double-click to rename";
    name.addEventListener("dblclick", () => {
      const next = window.prompt("bucket name", bucket.name);
      if (next) void this.panel.renameBucket(bucket.bucket_id, next);
    });
    const toggle = el("button", "", bucket.active ? "pause" : "resume");
    toggle.addEventListener("click", () => void this.panel.setActive(bucket.bucket_id, !bucket.active));
    const viewButton = el("button", "", "view");
    viewButton.addEventListener("click", () => {
      this.showOverlayShell();
      void this.view.openView(bucket.bucket_id, false).then(() => this.renderBucketView());
    });
    const ffButton = el("button", "", "ff");
    ffButton.addEventListener("click", () => {
      this.ff.show(bucket.bucket_id);
      this.renderFfDialog();
    });
    const remove = el("button", "danger", "x");
    remove.addEventListener("click", () => {
      if (window.confirm(`delete ${bucket.name}? members move to the discard pile`)) {
        void this.panel.deleteBucket(bucket.bucket_id);
      }
    });
    row.append(dot, name, toggle, viewButton, ffButton, remove);
    return row;
  }

  // ---- grid view ----

  private buildGridStage(): HTMLElement {
    const stage = el("div", "grid-stage");
    stage.append(el("div", "grid-tiles"));
    const more = el("button", "more", "more suggestions");
    more.addEventListener("click", () => void this.grid.moreSuggestions(this.perBucketCount()));
    stage.append(more);
    return stage;
  }

  private renderGrid(): void {
    const tiles = this.main.querySelector(".grid-tiles");
    if (!tiles) return;
    tiles.replaceChildren();
    for (const suggestion of this.grid.batch) {
      tiles.append(this.buildTile(suggestion));
    }
  }

  private buildTile(suggestion: Suggestion): HTMLElement {
    const tile = el("div", "tile");
    tile.style.background = placeholderFill(suggestion.image_id);
    const labeled = this.grid.pending.get(suggestion.image_id);
    if (labeled !== undefined) {
      tile.classList.add("labeled");
      tile.style.borderColor = labeled === DISCARD ? NEUTRAL_BORDER : this.bucketColor(labeled);
    } else if (suggestion.bucket_id !== null) {
      tile.style.borderColor = confidenceBorder(this.bucketColor(suggestion.bucket_id), suggestion.confidence);
    } else {
      tile.style.borderColor = NEUTRAL_BORDER;
    }
    tile.append(el("span", "tile-id", `#${suggestion.image_id}`));
    if (suggestion.oracle_flag) tile.append(el("span", "flag", "ff"));
    tile.addEventListener("click", () => this.grid.toggleLabel(suggestion.image_id));
    tile.addEventListener("contextmenu", (event) => {
      event.preventDefault();
      void this.grid.preview(suggestion.image_id);
    });
    return tile;
  }

  // ---- tetris view ----

  private buildTetrisStage(): HTMLElement {
    const stage = el("div", "tetris-stage");
    const fall = el("div", "fall-area");
    fall.append(el("div", "falling hidden"));
    stage.append(fall, el("div", "lanes"));
    return stage;
  }

  private renderLanes(): void {
    const lanesEl = this.main.querySelector(".lanes");
    if (!lanesEl) return;
    lanesEl.replaceChildren();
    const byId = new Map((this.panel.session?.buckets ?? []).map((b) => [b.bucket_id, b]));
    for (const lane of this.tetris.lanes()) {
      const bucket = byId.get(lane);
      const cell = el("div", lane === DISCARD ? "lane discard" : "lane");
      cell.dataset.lane = String(lane);
      cell.style.borderTopColor = lane === DISCARD ? NEUTRAL_BORDER : (bucket?.color ?? NEUTRAL_BORDER);
      cell.textContent = lane === DISCARD ? `discard ${this.panel.discardSize()}` : `${bucket?.name ?? lane} ${bucket?.size ?? ""}`;
      lanesEl.append(cell);
    }
  }

  private renderFalling(): void {
    const tile = this.main.querySelector<HTMLElement>(".falling");
    if (!tile) return;
    const item = this.tetris.current;
    if (!item) {
      tile.classList.add("hidden");
      return;
    }
    const lanes = this.tetris.lanes();
    const index = Math.max(0, lanes.indexOf(item.lane));
    tile.classList.remove("hidden");
    tile.style.left = `${((index + 0.5) * 100) / lanes.length}%`;
    tile.style.top = `${Math.min(1, item.progress) * 92}%`;
    tile.style.background = placeholderFill(item.suggestion.image_id);
    const color = item.tied && item.suggestion.bucket_id !== null
      ? confidenceBorder(this.bucketColor(item.suggestion.bucket_id), item.suggestion.confidence)
      : NEUTRAL_BORDER;
    tile.style.borderColor = color;
    tile.classList.toggle("untied", !item.tied);
    tile.textContent = `#${item.suggestion.image_id}`;
  }

  // ---- overlays ----

  private showOverlayShell(): void {
    this.overlay.classList.remove("hidden");
    this.overlay.replaceChildren(el("div", "overlay-box", "loading"));
  }

  private hideOverlay(): void {
    this.overlay.classList.add("hidden");
    this.overlay.replaceChildren();
  }

  private showImageOverlay(doc: ImageDoc): void {
    const box = el("div", "overlay-box");
    box.append(el("h3", "", `image #${doc.image_id}`));
    box.append(el("p", "muted", doc.uri));
    const list = el("ul", "concepts");
    for (const [concept, weight] of doc.metadata.concepts.slice(0, 12)) {
      list.append(el("li", "", `concept ${concept}: ${weight.toFixed(3)}`));
    }
    box.append(list);
    if (doc.metadata.extra) box.append(el("p", "", doc.metadata.extra));
    const close = el("button", "", "close");
    close.addEventListener("click", () => {
      if (this.tetris.infoOpen) void this.tetris.toggleInfo();
      this.hideOverlay();
    });
    box.append(close);
    this.overlay.classList.remove("hidden");
    this.overlay.replaceChildren(box);
  }

  private renderBucketView(): void {
    if (!this.view.open) return;
    const box = el("div", "overlay-box wide");
    const bucket = this.panel.panelBuckets().find((b) => b.bucket_id === this.view.bucketId);
    const title = this.view.reviewMode ? "review fast-forwarded members" : (bucket?.name ?? "bucket");
    box.append(el("h3", "", title));

    const controls = el("div", "view-controls");
    for (const [label, sort, order] of [
      ["confidence ↓", "confidence", "desc"],
      ["confidence ↑", "confidence", "asc"],
      ["newest", "added", "desc"],
      ["oldest", "added", "asc"],
    ] as const) {
      const button = el("button", this.view.sort === sort && this.view.order === order ? "on" : "", label);
      button.addEventListener("click", () =>
        void this.view.setSort(sort, order).then(() => this.renderBucketView()),
      );
      controls.append(button);
    }
    const rows = el("button", "", this.view.perRow === 3 ? "1/row" : "3/row");
    rows.addEventListener("click", () => {
      this.view.toggleRowSize();
      this.renderBucketView();
    });
    controls.append(rows);
    box.append(controls);

    const list = el("div", `member-grid per-${this.view.perRow}`);
    for (const member of this.view.members) {
      const cell = el("div", "member");
      cell.style.background = placeholderFill(member.image_id);
      cell.style.borderColor = bucket ? confidenceBorder(bucket.color, member.confidence) : NEUTRAL_BORDER;
      cell.append(el("span", "tile-id", `#${member.image_id}`));
      if (member.fast_forwarded) cell.append(el("span", "flag", "ff"));
      if (this.view.reviewMode) {
        cell.classList.toggle("reject", this.view.rejects.has(member.image_id));
        cell.addEventListener("click", () => {
          this.view.toggleReject(member.image_id);
          this.renderBucketView();
        });
      }
      list.append(cell);
    }
    box.append(list);

    const close = el(
      "button",
      "primary",
      this.view.reviewMode ? `keep rest, discard ${this.view.rejects.size}` : "close",
    );
    close.addEventListener("click", () => void this.view.close());
    box.append(close);
    this.overlay.classList.remove("hidden");
    this.overlay.replaceChildren(box);
  }

  private renderFfDialog(): void {
    if (!this.ff.open) return;
    const box = el("div", "overlay-box");
    const bucket = this.panel.panelBuckets().find((b) => b.bucket_id === this.ff.bucketId);
    box.append(el("h3", "", `fast-forward into ${bucket?.name ?? "?"}`));
    const count = el("input") as HTMLInputElement;
    count.type = "number";
    count.min = "1";
    count.value = String(this.ff.nFf);
    count.addEventListener("change", () => this.ff.setCount(Number(count.value)));
    const go = el("button", "primary", "add top-scored");
    go.addEventListener("click", () => void this.ff.submit());
    const cancel = el("button", "", "cancel");
    cancel.addEventListener("click", () => {
      this.ff.hide();
      this.hideOverlay();
    });
    const row = el("div", "view-controls");
    row.append(count, go, cancel);
    box.append(row, el("p", "muted", "the batch opens for review; rejects go to the discard pile"));
    this.overlay.classList.remove("hidden");
    this.overlay.replaceChildren(box);
  }

  // ---- misc ----

  private bucketColor(bucketId: number): string {
    const bucket = this.panel.session?.buckets.find((b) => b.bucket_id === bucketId);
    return bucket?.color ?? "#888888";
  }

  private showError(err: unknown): void {
    const text = err instanceof ApiError ? err.detail : String(err);
    this.toast.textContent = text;
    this.toast.classList.remove("hidden");
    if (this.toastTimer) clearTimeout(this.toastTimer);
    this.toastTimer = setTimeout(() => this.toast.classList.add("hidden"), 4000);
  }
}
