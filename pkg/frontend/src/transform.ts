export interface Size {
  width: number;
  height: number;
}

/** Aspect-preserving letterbox placement of a frame inside a display box. */
export interface Letterbox {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function letterbox(frame: Size, display: Size): Letterbox {
  const scale = Math.min(display.width / frame.width, display.height / frame.height);
  return {
    scale,
    offsetX: (display.width - frame.width * scale) / 2,
    offsetY: (display.height - frame.height * scale) / 2,
  };
}

export function frameToDisplay(t: Letterbox, x: number, y: number): [number, number] {
  return [x * t.scale + t.offsetX, y * t.scale + t.offsetY];
}

export function displayToFrame(t: Letterbox, x: number, y: number): [number, number] {
  return [(x - t.offsetX) / t.scale, (y - t.offsetY) / t.scale];
}
