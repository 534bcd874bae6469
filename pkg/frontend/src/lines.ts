/**
 * Parental line diagram: parents laid out in the server-computed order,
 * one link per cultivated or recommended cross.
 */

import type { LineLink, LinesResponse, ParentPoint } from "./types.js";

export const LINK_STYLE = {
  cultivated: { color: "#999999", dash: [] as number[], width: 1 },
  recommended: { color: "#d62728", dash: [6, 3], width: 2 },
};

export interface ParentColumn {
  id: string;
  /** Horizontal slot, 0-based, dense, exactly the server's `order`. */
  slot: number;
}

export interface LinkView {
  paternal: string;
  maternal: string;
  fromSlot: number;
  toSlot: number;
  kind: "cultivated" | "recommended";
  style: (typeof LINK_STYLE)["cultivated"];
  /** Hover payload; recommended links carry the predicted trait table. */
  hover: Record<string, number> | null;
  score: number | null;
}

export interface LinesView {
  columns: ParentColumn[];
  links: LinkView[];
}

export function buildLines(resp: LinesResponse): LinesView {
  const ordered: ParentPoint[] = [...resp.parents].sort((a, b) => a.order - b.order);
  const slotOf = new Map<string, number>();
  const columns = ordered.map((p, slot) => {
    slotOf.set(p.id, slot);
    return { id: p.id, slot };
  });
  const links = resp.links
    .filter((l: LineLink) => slotOf.has(l.paternal) && slotOf.has(l.maternal))
    .map((l) => ({
      paternal: l.paternal,
      maternal: l.maternal,
      fromSlot: slotOf.get(l.paternal)!,
      toSlot: slotOf.get(l.maternal)!,
      kind: l.kind,
      style: LINK_STYLE[l.kind],
      hover: l.predicted_traits ?? null,
      score: l.score ?? null,
    }));
  return { columns, links };
}

/** Text shown while hovering a link; traits come straight off the payload. */
export function hoverText(link: LinkView): string {
  const head = `${link.paternal} x ${link.maternal}`;
  if (!link.hover) return head;
  const parts = Object.entries(link.hover).map(([k, v]) => `${k}=${v}`);
  return `${head}: ${parts.join(", ")}`;
}
