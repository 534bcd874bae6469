/** Linear data-to-screen scales with padded bounds and pan/zoom. */

export interface Bounds {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export function dataBounds(points: Array<{ x: number; y: number }>): Bounds {
  if (points.length === 0) {
    return { xMin: -1, xMax: 1, yMin: -1, yMax: 1 };
  }
  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const p of points) {
    xMin = Math.min(xMin, p.x);
    xMax = Math.max(xMax, p.x);
    yMin = Math.min(yMin, p.y);
    yMax = Math.max(yMax, p.y);
  }
  // Degenerate spans (single point, collinear data) still need a window.
  if (xMax - xMin < 1e-12) {
    xMin -= 0.5;
    xMax += 0.5;
  }
  if (yMax - yMin < 1e-12) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  return { xMin, xMax, yMin, yMax };
}

export interface Viewport {
  width: number;
  height: number;
  zoom: number;
  panX: number;
  panY: number;
}

export function defaultViewport(width: number, height: number): Viewport {
  return { width, height, zoom: 1, panX: 0, panY: 0 };
}

/**
 * Data coordinates to screen pixels. The base fit letterboxes the padded
 * bounds into the viewport (y flipped: screen y grows downward); zoom and
 * pan then apply about the viewport center.
 */
export function toScreen(
  x: number,
  y: number,
  b: Bounds,
  vp: Viewport,
  pad = 0.05,
): [number, number] {
  const padX = (b.xMax - b.xMin) * pad;
  const padY = (b.yMax - b.yMin) * pad;
  const sx = vp.width / (b.xMax - b.xMin + 2 * padX);
  const sy = vp.height / (b.yMax - b.yMin + 2 * padY);
  const s = Math.min(sx, sy);
  const cx = (b.xMin + b.xMax) / 2;
  const cy = (b.yMin + b.yMax) / 2;
  const px = vp.width / 2 + (x - cx) * s * vp.zoom + vp.panX;
  const py = vp.height / 2 - (y - cy) * s * vp.zoom + vp.panY;
  return [px, py];
}

export function panBy(vp: Viewport, dx: number, dy: number): Viewport {
  return { ...vp, panX: vp.panX + dx, panY: vp.panY + dy };
}

export function zoomBy(vp: Viewport, factor: number): Viewport {
  const zoom = Math.max(0.05, Math.min(50, vp.zoom * factor));
  return { ...vp, zoom };
}
