import { describe, expect, it } from "vitest";

import { radiusFromWeight } from "../src/glyphs.js";
import { toScreen } from "../src/scales.js";
import {
  applyServerUpdate,
  createDualScene,
  renderCols,
  renderRows,
  showError,
  toggleTrait,
  type Draw2D,
  type DualScene,
} from "../src/scene.js";
import { fixtures } from "./fixtures.js";

class RecordingCtx implements Draw2D {
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 1;
  globalAlpha = 1;
  arcs: Array<{ x: number; y: number; r: number; op: "fill" | "stroke" | null }> = [];
  clears = 0;
  private open: Array<{ x: number; y: number; r: number; op: "fill" | "stroke" | null }> = [];

  beginPath(): void {
    this.open = [];
  }
  arc(x: number, y: number, r: number): void {
    const rec = { x, y, r, op: null };
    this.open.push(rec);
    this.arcs.push(rec);
  }
  fill(): void {
    for (const a of this.open) a.op = "fill";
  }
  stroke(): void {
    for (const a of this.open) a.op = "stroke";
  }
  clearRect(): void {
    this.clears++;
  }
}

const freshScene = (): DualScene =>
  createDualScene(
    fixtures.embedding_rows.points.map((p) => ({ ...p })),
    fixtures.embedding_cols.points.map((p) => ({ ...p })),
  );

describe("renderRows", () => {
  it("draws every glyph at the screen position of its served coordinates", () => {
    const scene = freshScene();
    const ctx = new RecordingCtx();
    renderRows(ctx, scene);
    const centers = new Set(arcCenters(ctx));
    const expected = new Set(
      scene.rows.points.map((p) => {
        const [px, py] = toScreen(p.x, p.y, scene.rows.bounds, scene.rows.viewport);
        return `${px},${py}`;
      }),
    );
    expect(centers).toEqual(expected);
  });

  it("sizes the outer ring by the served display weight", () => {
    const scene = freshScene();
    scene.rows.points[0]!.display_weight = 1;
    scene.rows.points[1]!.display_weight = 2;
    const ctx = new RecordingCtx();
    renderRows(ctx, scene);
    expect(outerRadiusAt(ctx, scene, 0)).toBe(radiusFromWeight(1));
    expect(outerRadiusAt(ctx, scene, 1)).toBe(radiusFromWeight(2));
    expect(outerRadiusAt(ctx, scene, 1)).toBeGreaterThan(outerRadiusAt(ctx, scene, 0));
  });

  it("degrades to single dots when zoomed far out", () => {
    const scene = freshScene();
    scene.rows.viewport.zoom = 0.1;
    const ctx = new RecordingCtx();
    renderRows(ctx, scene);
    expect(ctx.arcs).toHaveLength(scene.rows.points.length);
  });

  it("renders zero points without crashing", () => {
    const scene = createDualScene([], []);
    const ctx = new RecordingCtx();
    renderRows(ctx, scene);
    renderCols(ctx, scene);
    expect(ctx.arcs).toHaveLength(0);
    expect(ctx.clears).toBe(2);
  });
});

describe("renderCols", () => {
  it("draws one dot per gene at served coordinates", () => {
    const scene = freshScene();
    const ctx = new RecordingCtx();
    renderCols(ctx, scene);
    expect(ctx.arcs).toHaveLength(scene.cols.points.length);
    scene.cols.points.forEach((p, i) => {
      const [px, py] = toScreen(p.x, p.y, scene.cols.bounds, scene.cols.viewport);
      expect(ctx.arcs[i]).toMatchObject({ x: px, y: py });
    });
  });
});

describe("applyServerUpdate", () => {
  it("repaints both plots from a modify response and shows its timing", () => {
    const scene = freshScene();
    const resp = fixtures.modify_move_response;
    const next = applyServerUpdate(scene, resp);
    expect(next.rows.points).toEqual(resp.rows);
    expect(next.cols.points).toEqual(resp.cols);
    expect(next.rows.paintCount).toBe(scene.rows.paintCount + 1);
    expect(next.cols.paintCount).toBe(scene.cols.paintCount + 1);
    expect(next.lastElapsedMs).toBe(resp.elapsed_ms);
    expect(next.errorBanner).toBeNull();
  });

  it("keeps the last timing through a reset payload", () => {
    const scene = applyServerUpdate(freshScene(), fixtures.modify_move_response);
    const next = applyServerUpdate(scene, fixtures.reset);
    expect(next.lastElapsedMs).toBe(fixtures.modify_move_response.elapsed_ms);
    expect(next.rows.points).toEqual(fixtures.reset.rows);
  });
});

describe("error handling", () => {
  it("shows a banner while keeping the stale scene visible", () => {
    const scene = freshScene();
    const next = showError(scene, "edit rejected");
    expect(next.errorBanner).toBe("edit rejected");
    expect(next.rows.points).toBe(scene.rows.points);
    expect(next.cols.points).toBe(scene.cols.points);
  });
});

describe("toggleTrait", () => {
  it("hides and re-shows a trait", () => {
    const scene = freshScene();
    const name = scene.visibleTraits[0]!;
    const hidden = toggleTrait(scene, name);
    expect(hidden.visibleTraits).not.toContain(name);
    expect(toggleTrait(hidden, name).visibleTraits).toContain(name);
  });
});

function arcCenters(ctx: RecordingCtx): string[] {
  return ctx.arcs.map((a) => `${a.x},${a.y}`);
}

function outerRadiusAt(ctx: RecordingCtx, scene: DualScene, idx: number): number {
  const p = scene.rows.points[idx]!;
  const [px, py] = toScreen(p.x, p.y, scene.rows.bounds, scene.rows.viewport);
  return Math.max(...ctx.arcs.filter((a) => a.x === px && a.y === py).map((a) => a.r));
}
