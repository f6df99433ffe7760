import type { ControlEvent } from "./api.js";
import type { Quad } from "./quad.js";
import { pointInQuad, scaleAboutCenter } from "./quad.js";
import type { Letterbox, Size } from "./transform.js";
import { displayToFrame } from "./transform.js";

export interface GestureConfig {
  /** When set, a tap inside the middle half of the candidate locks it
   *  instead of moving a corner. */
  centerTapLock: boolean;
}

export interface GestureContext {
  transform: Letterbox;
  frame: Size;
  candidate: Quad | null;
  config: GestureConfig;
}

/**
 * Map a click/tap at display coordinates to a control event in frame
 * coordinates. Returns null for gestures outside the frame area (ignored).
 */
export function tapToControl(
  ctx: GestureContext,
  displayX: number,
  displayY: number,
): ControlEvent | null {
  const [x, y] = displayToFrame(ctx.transform, displayX, displayY);
  if (x < 0 || y < 0 || x > ctx.frame.width || y > ctx.frame.height) return null;
  if (
    ctx.config.centerTapLock &&
    ctx.candidate !== null &&
    pointInQuad(scaleAboutCenter(ctx.candidate, 0.5), x, y)
  ) {
    return { type: "lock" };
  }
  return { type: "tap", x, y };
}

/**
 * A corner drag commits once, at release: the server sees a single tap at
 * the release point, which moves the nearest corner there.
 */
export function dragEndToControl(
  ctx: GestureContext,
  releaseDisplayX: number,
  releaseDisplayY: number,
): ControlEvent | null {
  const [x, y] = displayToFrame(ctx.transform, releaseDisplayX, releaseDisplayY);
  if (x < 0 || y < 0 || x > ctx.frame.width || y > ctx.frame.height) return null;
  return { type: "tap", x, y };
}

export const lockControl: ControlEvent = { type: "lock" };
export const unlockControl: ControlEvent = { type: "unlock" };
export const backControl: ControlEvent = { type: "relock_previous" };

export function modeControl(kind: string): ControlEvent {
  return { type: "mode", kind };
}
