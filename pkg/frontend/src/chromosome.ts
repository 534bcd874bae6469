/**
 * Gene browser view-models: per-chromosome weight bars plus the genotype
 * boxplot panel. Bar heights and boxplot statistics are copied verbatim
 * from the service payloads.
 */

import type { BoxplotGroup, BoxplotResponse, ColPoint } from "./types.js";

export const N_CHROMOSOMES = 12;

// One color per genotype dose (0/1/2 copies of the reference allele).
export const GENOTYPE_COLORS: Record<string, string> = {
  "0": "#4c72b0",
  "1": "#dd8452",
  "2": "#55a868",
};

export interface GeneBar {
  id: string;
  position: number;
  /** Bar height in weight units, exactly as served. */
  height: number;
  selected: boolean;
}

export interface ChromosomeTrack {
  chromosome: number;
  bars: GeneBar[];
}

/**
 * Group genes into chromosome tracks ordered 1..12, each track sorted by
 * position. With `selectedIds` given, only those genes keep bars.
 */
export function buildTracks(
  genes: ColPoint[],
  selectedIds?: Set<string>,
): ChromosomeTrack[] {
  const tracks: ChromosomeTrack[] = [];
  for (let c = 1; c <= N_CHROMOSOMES; c++) tracks.push({ chromosome: c, bars: [] });
  for (const g of genes) {
    if (selectedIds && !selectedIds.has(g.id)) continue;
    const track = tracks[g.chromosome - 1];
    if (!track) continue;
    track.bars.push({
      id: g.id,
      position: g.position,
      height: g.weight,
      selected: selectedIds ? selectedIds.has(g.id) : false,
    });
  }
  for (const t of tracks) t.bars.sort((a, b) => a.position - b.position);
  return tracks;
}

export interface BoxGlyph {
  genotype: string;
  color: string;
  count: number;
  /** Absent when the group is empty; the panel shows a count-0 label instead. */
  stats: Required<Omit<BoxplotGroup, "count">> | null;
}

export interface BoxplotView {
  gene: string;
  trait: string;
  boxes: BoxGlyph[];
  legend: { genotype: string; color: string }[];
}

/** Turn a /gene/{g}/boxplot payload into drawable boxes, numbers untouched. */
export function buildBoxplot(resp: BoxplotResponse): BoxplotView {
  const boxes: BoxGlyph[] = [];
  for (const genotype of ["0", "1", "2"]) {
    const group = resp.groups[genotype] ?? { count: 0 };
    boxes.push({
      genotype,
      color: GENOTYPE_COLORS[genotype]!,
      count: group.count,
      stats:
        group.count > 0
          ? {
              median: group.median!,
              q1: group.q1!,
              q3: group.q3!,
              whisker_low: group.whisker_low!,
              whisker_high: group.whisker_high!,
              outliers: group.outliers ?? [],
            }
          : null,
    });
  }
  return {
    gene: resp.gene,
    trait: resp.trait,
    boxes,
    legend: Object.entries(GENOTYPE_COLORS).map(([genotype, color]) => ({ genotype, color })),
  };
}

/** Label shown under each box: genotype dose plus sample count. */
export function boxLabel(box: BoxGlyph): string {
  return box.count === 0 ? `dose ${box.genotype} (no hybrids)` : `dose ${box.genotype} (n=${box.count})`;
}

export interface BoxplotPanelState {
  enabled: boolean;
  reason: string | null;
}

/** The panel greys out when the chosen trait is not in the dataset. */
export function boxplotPanelState(
  datasetTraits: string[],
  trait: string | null,
): BoxplotPanelState {
  if (trait === null) return { enabled: false, reason: "pick a trait" };
  if (!datasetTraits.includes(trait)) {
    return { enabled: false, reason: `trait "${trait}" is not in this dataset` };
  }
  return { enabled: true, reason: null };
}
