/**
 * Grounding overlay rendering: ground truth as solid strokes, predictions
 * as translucent fills, matched pairs linked center-to-center with their
 * scores. All geometry passes through one dims -> viewport transform so
 * boxes stay registered under zoom and pan. The drawing surface is a
 * narrow interface, letting tests record calls instead of rasterizing.
 */

import type { CasePayload } from "./api.js";

export interface Dims {
  width: number;
  height: number;
}

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export interface LayerToggles {
  gt: boolean;
  predictions: boolean;
  matches: boolean;
}

/** Subset of CanvasRenderingContext2D the renderer needs. */
export interface DrawSurface {
  lineWidth: number;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  globalAlpha: number;
  font: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
}

export interface RenderSummary {
  gtDrawn: number;
  predictionsDrawn: number;
  linksDrawn: number;
  badge: string | null;
}

export const GT_COLOR = "#1f77ff";
export const PRED_COLOR = "#ff3355";
export const PRED_FILL_ALPHA = 0.25;

/** Fit the image rectangle into the viewport, then apply zoom and pan. */
export function fitTransform(
  dims: Dims,
  viewportWidth: number,
  viewportHeight: number,
  zoom = 1,
  panX = 0,
  panY = 0
): ViewTransform {
  const fit = Math.min(viewportWidth / dims.width, viewportHeight / dims.height);
  const scale = fit * zoom;
  const offsetX = (viewportWidth - dims.width * scale) / 2 + panX;
  const offsetY = (viewportHeight - dims.height * scale) / 2 + panY;
  return { scale, offsetX, offsetY };
}

export function toViewport(
  t: ViewTransform,
  x: number,
  y: number
): [number, number] {
  return [x * t.scale + t.offsetX, y * t.scale + t.offsetY];
}

export function toImage(
  t: ViewTransform,
  vx: number,
  vy: number
): [number, number] {
  return [(vx - t.offsetX) / t.scale, (vy - t.offsetY) / t.scale];
}

function boxCenter(box: [number, number, number, number]): [number, number] {
  return [(box[0] + box[2]) / 2, (box[1] + box[3]) / 2];
}

function drawBox(
  ctx: DrawSurface,
  t: ViewTransform,
  box: [number, number, number, number],
  mode: "stroke" | "fill"
): void {
  const [x1, y1] = toViewport(t, box[0], box[1]);
  const [x2, y2] = toViewport(t, box[2], box[3]);
  if (mode === "stroke") {
    ctx.strokeRect(x1, y1, x2 - x1, y2 - y1);
  } else {
    ctx.fillRect(x1, y1, x2 - x1, y2 - y1);
    ctx.strokeRect(x1, y1, x2 - x1, y2 - y1);
  }
}

export function renderOverlay(
  ctx: DrawSurface,
  payload: CasePayload,
  t: ViewTransform,
  toggles: LayerToggles
): RenderSummary {
  const summary: RenderSummary = {
    gtDrawn: 0,
    predictionsDrawn: 0,
    linksDrawn: 0,
    badge: null,
  };

  if (toggles.predictions) {
    for (const pred of payload.predictions) {
      ctx.globalAlpha = PRED_FILL_ALPHA;
      ctx.fillStyle = PRED_COLOR;
      ctx.strokeStyle = PRED_COLOR;
      ctx.lineWidth = 1;
      ctx.setLineDash([6, 4]);
      drawBox(ctx, t, pred.box, "fill");
      ctx.globalAlpha = 1;
      summary.predictionsDrawn += 1;
    }
    ctx.setLineDash([]);
  }

  if (toggles.gt) {
    for (const box of payload.gt_boxes) {
      ctx.globalAlpha = 1;
      ctx.strokeStyle = GT_COLOR;
      ctx.lineWidth = 2;
      ctx.setLineDash([]);
      drawBox(ctx, t, box, "stroke");
      summary.gtDrawn += 1;
    }
  }

  if (toggles.matches && toggles.gt && toggles.predictions) {
    for (const pair of payload.pairs) {
      const pred = payload.predictions[pair.pred];
      const gt = payload.gt_boxes[pair.gt];
      if (!pred || !gt) continue;
      const [px, py] = toViewport(t, ...boxCenter(pred.box));
      const [gx, gy] = toViewport(t, ...boxCenter(gt));
      ctx.globalAlpha = 1;
      ctx.strokeStyle = "#222222";
      ctx.lineWidth = 1;
      ctx.setLineDash([2, 3]);
      ctx.beginPath();
      ctx.moveTo(px, py);
      ctx.lineTo(gx, gy);
      ctx.stroke();
      ctx.setLineDash([]);
      ctx.fillStyle = "#222222";
      ctx.font = "11px sans-serif";
      ctx.fillText(
        `iou ${pair.iou.toFixed(2)} loc ${pair.loc.toFixed(2)} ` +
          `shape ${pair.shape.toFixed(2)}`,
        (px + gx) / 2 + 4,
        (py + gy) / 2 - 4
      );
      summary.linksDrawn += 1;
    }
  }

  if (payload.predictions.length === 0) {
    summary.badge = "no predictions";
  }
  return summary;
}
