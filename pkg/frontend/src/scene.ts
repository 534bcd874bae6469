/**
 * The dual view: one scatter scene per side, repainted only from service
 * responses. The scene never edits coordinates itself; a failed request
 * leaves the last served state on screen behind an error banner.
 */

import { buildGlyphs, glyphMode, radiusFromWeight, traitRanges } from "./glyphs.js";
import { dataBounds, defaultViewport, toScreen, type Bounds, type Viewport } from "./scales.js";
import type { ColPoint, ModifyResponse, ResetResponse, RowPoint, Side } from "./types.js";

export interface ScatterScene<P extends { x: number; y: number }> {
  side: Side;
  points: P[];
  bounds: Bounds;
  viewport: Viewport;
  /** Repaint generation; bumps every time new server points land. */
  paintCount: number;
}

export interface DualScene {
  rows: ScatterScene<RowPoint>;
  cols: ScatterScene<ColPoint>;
  /** Milliseconds reported by the server for the last applied edit. */
  lastElapsedMs: number | null;
  /** Non-blocking error banner; stale scene stays visible underneath. */
  errorBanner: string | null;
  visibleTraits: string[];
}

function scene<P extends { x: number; y: number }>(
  side: Side,
  points: P[],
  width: number,
  height: number,
): ScatterScene<P> {
  return {
    side,
    points,
    bounds: dataBounds(points),
    viewport: defaultViewport(width, height),
    paintCount: 1,
  };
}

export function createDualScene(
  rows: RowPoint[],
  cols: ColPoint[],
  width = 800,
  height = 600,
): DualScene {
  const names = rows.length > 0 ? Object.keys(rows[0]!.traits) : [];
  return {
    rows: scene("rows", rows, width, height),
    cols: scene("cols", cols, width, height),
    lastElapsedMs: null,
    errorBanner: null,
    visibleTraits: names,
  };
}

function repaint<P extends { x: number; y: number }>(
  s: ScatterScene<P>,
  points: P[],
): ScatterScene<P> {
  return { ...s, points, bounds: dataBounds(points), paintCount: s.paintCount + 1 };
}

/** Apply a /modify or /reset response: both plots repaint from the payload. */
export function applyServerUpdate(
  scene: DualScene,
  resp: ModifyResponse | ResetResponse,
): DualScene {
  return {
    ...scene,
    rows: repaint(scene.rows, resp.rows),
    cols: repaint(scene.cols, resp.cols),
    lastElapsedMs: "elapsed_ms" in resp ? resp.elapsed_ms : scene.lastElapsedMs,
    errorBanner: null,
  };
}

export function showError(scene: DualScene, message: string): DualScene {
  return { ...scene, errorBanner: message };
}

export function toggleTrait(scene: DualScene, name: string): DualScene {
  const visible = scene.visibleTraits.includes(name)
    ? scene.visibleTraits.filter((t) => t !== name)
    : [...scene.visibleTraits, name];
  return { ...scene, visibleTraits: visible };
}

/**
 * The slice of CanvasRenderingContext2D the renderer touches; tests drive it
 * with a recording stub, the browser passes the real context.
 */
export interface Draw2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

const RECOMMENDED_COLOR = "#d62728";
const POINT_COLOR = "#888888";

/** Render the row side: concentric trait rings, dots when zoomed far out. */
export function renderRows(ctx: Draw2D, scene: DualScene): void {
  const s = scene.rows;
  ctx.clearRect(0, 0, s.viewport.width, s.viewport.height);
  const ranges = traitRanges(s.points);
  const glyphs = buildGlyphs(s.points, scene.visibleTraits, ranges);
  const mode = glyphMode(s.viewport.zoom);
  s.points.forEach((p, i) => {
    const [px, py] = toScreen(p.x, p.y, s.bounds, s.viewport);
    const r = radiusFromWeight(p.display_weight);
    if (mode === "dot") {
      ctx.fillStyle = p.recommended ? RECOMMENDED_COLOR : POINT_COLOR;
      ctx.beginPath();
      ctx.arc(px, py, Math.max(1.5, r / 3), 0, 2 * Math.PI);
      ctx.fill();
      return;
    }
    const glyph = glyphs[i]!;
    ctx.strokeStyle = p.recommended ? RECOMMENDED_COLOR : POINT_COLOR;
    glyph.traits.forEach((_, t) => {
      // Outermost ring first; each ring's fill arc reflects the trait fraction.
      const ringR = (r * (glyph.traits.length - t)) / glyph.traits.length;
      ctx.beginPath();
      ctx.arc(px, py, ringR, 0, 2 * Math.PI);
      ctx.stroke();
      ctx.fillStyle = glyph.colors[t]!;
      ctx.beginPath();
      ctx.arc(px, py, ringR, -Math.PI / 2, -Math.PI / 2 + 2 * Math.PI * glyph.fills[t]!);
      ctx.fill();
    });
  });
}

/** Render the column side: plain dots sized by weight. */
export function renderCols(ctx: Draw2D, scene: DualScene): void {
  const s = scene.cols;
  ctx.clearRect(0, 0, s.viewport.width, s.viewport.height);
  for (const p of s.points) {
    const [px, py] = toScreen(p.x, p.y, s.bounds, s.viewport);
    ctx.fillStyle = p.recommended ? RECOMMENDED_COLOR : POINT_COLOR;
    ctx.beginPath();
    ctx.arc(px, py, radiusFromWeight(p.display_weight, 3), 0, 2 * Math.PI);
    ctx.fill();
  }
}
