/**
 * Hybrid glyphs: concentric circles, one ring per visible trait, fill
 * fraction showing where the hybrid sits in the dataset's trait range.
 */

import type { RowPoint } from "./types.js";

export const TRAIT_PALETTE = [
  "#4c78a8",
  "#f58518",
  "#54a24b",
  "#b279a2",
  "#e45756",
  "#72b7b2",
] as const;

export interface GlyphSpec {
  /** Trait names in render order, hidden traits already excluded. */
  traits: string[];
  colors: string[];
  /** Fill fraction per trait ring, each in [0, 1]. */
  fills: number[];
}

export interface TraitRange {
  min: number;
  max: number;
}

/** Dataset-wide trait ranges; the normalization denominator for every glyph. */
export function traitRanges(points: RowPoint[]): Record<string, TraitRange> {
  const ranges: Record<string, TraitRange> = {};
  for (const p of points) {
    for (const [name, v] of Object.entries(p.traits)) {
      const r = ranges[name];
      if (!r) {
        ranges[name] = { min: v, max: v };
      } else {
        r.min = Math.min(r.min, v);
        r.max = Math.max(r.max, v);
      }
    }
  }
  return ranges;
}

/**
 * Build one glyph per point. `visible` filters and orders the rings; traits
 * toggled off via the legend never reach the renderer. A constant trait fills
 * every ring completely (every hybrid is at the dataset maximum).
 */
export function buildGlyphs(
  points: RowPoint[],
  visible: string[],
  ranges: Record<string, TraitRange>,
  palette: readonly string[] = TRAIT_PALETTE,
): GlyphSpec[] {
  const colors = visible.map((_, i) => palette[i % palette.length]!);
  return points.map((p) => {
    const fills = visible.map((name) => {
      const r = ranges[name];
      const v = p.traits[name];
      if (r === undefined || v === undefined) return 0;
      if (r.max === r.min) return 1;
      return clamp01((v - r.min) / (r.max - r.min));
    });
    return { traits: [...visible], colors, fills };
  });
}

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

/**
 * Area-proportional radius: doubling the weight doubles the glyph's area,
 * not its diameter, so heavy points stand out without swallowing the plot.
 */
export function radiusFromWeight(displayWeight: number, base = 6): number {
  return base * Math.sqrt(Math.max(displayWeight, 0));
}

/** Below this zoom the concentric rings are unreadable; draw plain dots. */
export const GLYPH_DETAIL_ZOOM = 0.5;

export function glyphMode(zoom: number): "rings" | "dot" {
  return zoom >= GLYPH_DETAIL_ZOOM ? "rings" : "dot";
}
