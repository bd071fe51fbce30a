/**
 * Zoom/pan state shared by the band viewer and the result pane.
 *
 * Coordinates live in two spaces. Image space is the full-resolution pixel
 * grid annotations are stored in, whatever the current zoom. Screen space is
 * CSS pixels inside the canvas. Image pixel (ix, iy) covers the screen
 * rectangle [panX + ix*zoom, panX + (ix+1)*zoom) x [panY + iy*zoom, ...),
 * and a click anywhere inside that rectangle must resolve to exactly
 * (ix, iy). Pans are kept integral so the floor division below never sits
 * on a float boundary.
 */

export interface Point {
  x: number;
  y: number;
}

// fractional steps are powers of two so screen->image stays exact there too
export const ZOOM_LADDER = [0.125, 0.25, 0.5, 1, 2, 3, 4, 5, 6, 7, 8] as const;

export class Viewport {
  zoom = 1;
  panX = 0;
  panY = 0;

  /** Map a screen position to the image pixel under it. */
  toImage(sx: number, sy: number): Point {
    return {
      x: Math.floor((sx - this.panX) / this.zoom),
      y: Math.floor((sy - this.panY) / this.zoom),
    };
  }

  /** Screen position of an image pixel's top-left corner. */
  toScreen(ix: number, iy: number): Point {
    return {
      x: this.panX + ix * this.zoom,
      y: this.panY + iy * this.zoom,
    };
  }

  panBy(dx: number, dy: number): void {
    this.panX += Math.round(dx);
    this.panY += Math.round(dy);
  }

  /** Step the zoom ladder, holding the image point under (sx, sy) still. */
  zoomStep(direction: 1 | -1, sx: number, sy: number): void {
    const index = ZOOM_LADDER.indexOf(this.zoom as (typeof ZOOM_LADDER)[number]);
    const next = ZOOM_LADDER[Math.min(
      ZOOM_LADDER.length - 1,
      Math.max(0, (index < 0 ? 3 : index) + direction),
    )];
    this.setZoom(next, sx, sy);
  }

  setZoom(zoom: number, sx: number, sy: number): void {
    if (zoom === this.zoom) return;
    // continuous image coordinate under the anchor, re-pinned at the new
    // zoom; rounding keeps the pan integral (drift under one screen pixel)
    const imageX = (sx - this.panX) / this.zoom;
    const imageY = (sy - this.panY) / this.zoom;
    this.zoom = zoom;
    this.panX = Math.round(sx - imageX * zoom);
    this.panY = Math.round(sy - imageY * zoom);
  }

  /** Center the whole image in a viewport of the given screen size. */
  fit(imageWidth: number, imageHeight: number, screenWidth: number, screenHeight: number): void {
    let best: number = ZOOM_LADDER[0];
    for (const z of ZOOM_LADDER) {
      if (imageWidth * z <= screenWidth && imageHeight * z <= screenHeight) {
        best = z;
      }
    }
    this.zoom = best;
    this.panX = Math.round((screenWidth - imageWidth * best) / 2);
    this.panY = Math.round((screenHeight - imageHeight * best) / 2);
  }

  state(): { zoom: number; panX: number; panY: number } {
    return { zoom: this.zoom, panX: this.panX, panY: this.panY };
  }
}

/** True if the image pixel lies inside a width x height image. */
export function insideImage(p: Point, width: number, height: number): boolean {
  return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height;
}
