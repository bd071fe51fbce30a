/**
 * Canvas pane showing one image (a band or a result artifact) under a
 * shared viewport, with annotation markers and mouse bindings. Two panes
 * constructed with the same Viewport instance stay synchronized: every
 * interaction redraws all panes registered against that viewport.
 */

import { AnnotationStore } from "./annotations.js";
import { insideImage, Viewport } from "./viewport.js";

const MARKER_RADIUS = 4;
const REMOVE_RADIUS = 6; // image pixels

type Hint = (text: string) => void;

const redrawGroups = new Map<Viewport, Set<Viewer>>();

export class Viewer {
  readonly canvas: HTMLCanvasElement;
  private readonly ctx: CanvasRenderingContext2D;
  private image: HTMLImageElement | null = null;
  private dragging = false;
  private dragLastX = 0;
  private dragLastY = 0;
  private moved = false;

  constructor(
    canvas: HTMLCanvasElement,
    readonly viewport: Viewport,
    private readonly store: AnnotationStore | null,
    private readonly hint: Hint = () => {},
    private readonly editable = store !== null,
  ) {
    this.canvas = canvas;
    const ctx = canvas.getContext("2d");
    if (ctx === null) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    let group = redrawGroups.get(viewport);
    if (group === undefined) {
      group = new Set();
      redrawGroups.set(viewport, group);
    }
    group.add(this);
    this.bind();
  }

  setImage(src: string, onload?: () => void): void {
    const img = new Image();
    img.onload = () => {
      this.image = img;
      this.draw();
      onload?.();
    };
    img.src = src;
  }

  imageSize(): { width: number; height: number } | null {
    if (this.image === null) return null;
    return { width: this.image.naturalWidth, height: this.image.naturalHeight };
  }

  private groupDraw(): void {
    for (const viewer of redrawGroups.get(this.viewport) ?? []) viewer.draw();
  }

  draw(): void {
    const { canvas, ctx } = this;
    ctx.fillStyle = "#14141c";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (this.image === null) return;
    ctx.imageSmoothingEnabled = false; // zoomed pixels stay square
    const vp = this.viewport;
    ctx.drawImage(
      this.image,
      vp.panX,
      vp.panY,
      this.image.naturalWidth * vp.zoom,
      this.image.naturalHeight * vp.zoom,
    );
    if (this.store !== null) this.drawMarkers();
  }

  private drawMarkers(): void {
    const { ctx, store } = this;
    if (store === null) return;
    for (const p of store.points) {
      const cls = store.classByName(p.cls);
      // mark the center of the zoomed pixel block
      const s = this.viewport.toScreen(p.x, p.y);
      const cx = s.x + this.viewport.zoom / 2;
      const cy = s.y + this.viewport.zoom / 2;
      ctx.beginPath();
      ctx.arc(cx, cy, MARKER_RADIUS, 0, Math.PI * 2);
      ctx.fillStyle = cls?.color ?? "#616161";
      ctx.fill();
      ctx.lineWidth = 1.5;
      ctx.strokeStyle = "#ffffff";
      ctx.stroke();
    }
  }

  private bind(): void {
    const { canvas } = this;
    canvas.addEventListener("mousedown", (ev) => {
      this.dragging = true;
      this.moved = false;
      this.dragLastX = ev.offsetX;
      this.dragLastY = ev.offsetY;
    });
    canvas.addEventListener("mousemove", (ev) => {
      if (!this.dragging) return;
      const dx = ev.offsetX - this.dragLastX;
      const dy = ev.offsetY - this.dragLastY;
      if (Math.abs(dx) + Math.abs(dy) > 2) this.moved = true;
      if (this.moved) {
        this.viewport.panBy(dx, dy);
        this.dragLastX = ev.offsetX;
        this.dragLastY = ev.offsetY;
        this.groupDraw();
      }
    });
    canvas.addEventListener("mouseup", (ev) => {
      const wasDrag = this.moved;
      this.dragging = false;
      this.moved = false;
      if (wasDrag || !this.editable || this.store === null) return;
      const p = this.viewport.toImage(ev.offsetX, ev.offsetY);
      const size = this.imageSize();
      if (size === null || !insideImage(p, size.width, size.height)) {
        this.hint("click is outside the image");
        return;
      }
      if (ev.altKey || ev.button === 2) {
        const removed = this.store.removeNearest(p.x, p.y, REMOVE_RADIUS);
        this.hint(removed ? `removed ${removed.cls} (${removed.x}, ${removed.y})` : "no point near click");
      } else if (this.store.place(p.x, p.y)) {
        this.hint(`${this.store.activeClass} (${p.x}, ${p.y})`);
      } else {
        this.hint("duplicate point ignored");
      }
      this.groupDraw();
    });
    canvas.addEventListener("mouseleave", () => {
      this.dragging = false;
      this.moved = false;
    });
    canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
    canvas.addEventListener(
      "wheel",
      (ev) => {
        ev.preventDefault();
        this.viewport.zoomStep(ev.deltaY < 0 ? 1 : -1, ev.offsetX, ev.offsetY);
        this.groupDraw();
      },
      { passive: false },
    );
  }
}
