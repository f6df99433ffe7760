import type { SessionMeta } from "./api.js";
import type { Quad } from "./quad.js";
import type { Letterbox, Size } from "./transform.js";
import { frameToDisplay } from "./transform.js";

export const CANDIDATE_COLOR = "yellow";
export const LOCKED_COLOR = "red";
export const THUMBNAIL_SCALE = 0.25;
export const THUMBNAIL_ALPHA = 0.65;
const THUMBNAIL_PAD = 8;

export interface Outline {
  points: [number, number][]; // display coordinates, closed implicitly
  color: string;
}

export interface ThumbnailPlacement {
  x: number;
  y: number;
  width: number;
  height: number;
  alpha: number;
}

export interface OverlayPlan {
  outlines: Outline[];
  /** Warped-output thumbnail in the lower-right, present only when locked. */
  thumbnail: ThumbnailPlacement | null;
  statusText: string;
}

function project(quad: Quad, t: Letterbox): [number, number][] {
  return quad.map(([x, y]) => frameToDisplay(t, x, y));
}

/**
 * Decide what to draw for one poll result: candidate outline in yellow,
 * locked outline in red, and (while locked) a quarter-scale translucent
 * thumbnail of the warped output in the lower-right corner.
 */
export function planOverlay(meta: SessionMeta, t: Letterbox, display: Size): OverlayPlan {
  const outlines: Outline[] = [];
  if (meta.candidate) {
    outlines.push({ points: project(meta.candidate, t), color: CANDIDATE_COLOR });
  }
  if (meta.locked) {
    outlines.push({ points: project(meta.locked, t), color: LOCKED_COLOR });
  }
  let thumbnail: ThumbnailPlacement | null = null;
  if (meta.locked) {
    const width = display.width * THUMBNAIL_SCALE;
    const height = display.height * THUMBNAIL_SCALE;
    thumbnail = {
      x: display.width - width - THUMBNAIL_PAD,
      y: display.height - height - THUMBNAIL_PAD,
      width,
      height,
      alpha: THUMBNAIL_ALPHA,
    };
  }
  const staleness =
    meta.staleness_ms >= 1000
      ? `${(meta.staleness_ms / 1000).toFixed(1)} s behind`
      : "live";
  return {
    outlines,
    thumbnail,
    statusText: `#${meta.seq} · ${meta.mode} · ${staleness}`,
  };
}

/** Paint a plan onto a 2D canvas context (images handled by the caller). */
export function paintOutlines(
  ctx: CanvasRenderingContext2D,
  plan: OverlayPlan,
  cornerRadius = 5,
): void {
  for (const outline of plan.outlines) {
    ctx.strokeStyle = outline.color;
    ctx.fillStyle = outline.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    outline.points.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
    ctx.closePath();
    ctx.stroke();
    for (const [x, y] of outline.points) {
      ctx.beginPath();
      ctx.arc(x, y, cornerRadius, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
