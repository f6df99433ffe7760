export type Point = [number, number];

/** Corners ordered TL, TR, BR, BL, clockwise with y pointing down. */
export type Quad = [Point, Point, Point, Point];

export function parseQuad(value: unknown): Quad | null {
  if (!Array.isArray(value) || value.length !== 4) return null;
  const corners: Point[] = [];
  for (const pt of value) {
    if (!Array.isArray(pt) || pt.length !== 2) return null;
    const [x, y] = pt;
    if (typeof x !== "number" || typeof y !== "number") return null;
    corners.push([x, y]);
  }
  return corners as Quad;
}

export function quadCenter(quad: Quad): Point {
  let cx = 0;
  let cy = 0;
  for (const [x, y] of quad) {
    cx += x / 4;
    cy += y / 4;
  }
  return [cx, cy];
}

export function scaleAboutCenter(quad: Quad, factor: number): Quad {
  const [cx, cy] = quadCenter(quad);
  return quad.map(([x, y]) => [cx + (x - cx) * factor, cy + (y - cy) * factor]) as Quad;
}

/** Inside test for a convex clockwise quad (boundary counts as inside). */
export function pointInQuad(quad: Quad, x: number, y: number): boolean {
  for (let i = 0; i < 4; i++) {
    const [ax, ay] = quad[i];
    const [bx, by] = quad[(i + 1) % 4];
    if ((bx - ax) * (y - ay) - (by - ay) * (x - ax) < 0) return false;
  }
  return true;
}

/** Index of the corner nearest to (x, y); ties go to the earlier corner. */
export function nearestCorner(quad: Quad, x: number, y: number): number {
  let best = 0;
  let bestD = Infinity;
  quad.forEach(([cx, cy], i) => {
    const d = (cx - x) ** 2 + (cy - y) ** 2;
    if (d < bestD) {
      bestD = d;
      best = i;
    }
  });
  return best;
}
