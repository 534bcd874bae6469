/**
 * Lasso selection and the pending-transform state for one plot side.
 */

import type { Side } from "./types.js";

export type Transform =
  | { kind: "drag"; delta: [number, number] }
  | { kind: "scale"; factor: number };

export interface SelectionState {
  side: Side;
  /** Point ids inside the lasso, in plot order. */
  ids: string[];
  /** Indices into the served point array, aligned with ids. */
  indices: number[];
  polygon: Array<[number, number]> | null;
  pending: Transform | null;
}

export function emptySelection(side: Side): SelectionState {
  return { side, ids: [], indices: [], polygon: null, pending: null };
}

/** Ray-casting point-in-polygon; boundary points count as inside. */
export function pointInPolygon(x: number, y: number, poly: Array<[number, number]>): boolean {
  let inside = false;
  const n = poly.length;
  for (let i = 0, j = n - 1; i < n; j = i++) {
    const [xi, yi] = poly[i]!;
    const [xj, yj] = poly[j]!;
    // On-edge check keeps lasso borders inclusive.
    const cross = (xj - xi) * (y - yi) - (yj - yi) * (x - xi);
    const within =
      Math.min(xi, xj) - 1e-12 <= x &&
      x <= Math.max(xi, xj) + 1e-12 &&
      Math.min(yi, yj) - 1e-12 <= y &&
      y <= Math.max(yi, yj) + 1e-12;
    if (Math.abs(cross) < 1e-12 && within) return true;
    if (yi > y !== yj > y && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

/** Select every point whose data coordinates fall inside the lasso polygon. */
export function lassoSelect(
  side: Side,
  points: Array<{ id: string; x: number; y: number }>,
  polygon: Array<[number, number]>,
): SelectionState {
  if (polygon.length < 3) return emptySelection(side);
  const ids: string[] = [];
  const indices: number[] = [];
  points.forEach((p, i) => {
    if (pointInPolygon(p.x, p.y, polygon)) {
      ids.push(p.id);
      indices.push(i);
    }
  });
  return { side, ids, indices, polygon, pending: null };
}

export function withPending(sel: SelectionState, pending: Transform): SelectionState {
  if (sel.indices.length === 0) {
    throw new Error("transform requires a non-empty selection");
  }
  return { ...sel, pending };
}

/**
 * Positions with the pending transform previewed locally, before the server
 * confirms. Dragging by d then by -d restores the original positions exactly.
 */
export function previewPositions(
  points: Array<{ x: number; y: number }>,
  sel: SelectionState,
): Array<{ x: number; y: number }> {
  if (!sel.pending || sel.indices.length === 0) {
    return points.map((p) => ({ x: p.x, y: p.y }));
  }
  const chosen = new Set(sel.indices);
  const out = points.map((p) => ({ x: p.x, y: p.y }));
  if (sel.pending.kind === "drag") {
    const [dx, dy] = sel.pending.delta;
    for (const i of chosen) {
      out[i]!.x += dx;
      out[i]!.y += dy;
    }
  } else {
    let cx = 0;
    let cy = 0;
    for (const i of chosen) {
      cx += points[i]!.x;
      cy += points[i]!.y;
    }
    cx /= chosen.size;
    cy /= chosen.size;
    const f = sel.pending.factor;
    for (const i of chosen) {
      out[i]!.x = cx + (points[i]!.x - cx) * f;
      out[i]!.y = cy + (points[i]!.y - cy) * f;
    }
  }
  return out;
}
