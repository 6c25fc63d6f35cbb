/**
 * Glyph-grid model shared by the editor core and the view.
 *
 * The canonical level representation is the wire one: an array of glyph
 * strings, one per row, addressed as (x, y) with x counting columns from the
 * left and y counting rows from the top.  Tile IDs only appear at the edges
 * (changes, decisions, patch math); the legend maps between the two.
 *
 * The 3x3 patch helpers mirror the service's overlap rule exactly: a patch is
 * any 3x3 window holding at least one non-empty cell, windows are enumerated
 * row-major, and two patch multisets intersect by consuming matches
 * first-come.  The explanation panel highlights come from this rule, so what
 * the UI marks is what the evaluation metric counts.
 */

import { ChangeTuple, EMPTY_TILE, TileInfo } from "./protocol.js";

export interface Legend {
  glyphToId: Map<string, number>;
  idToGlyph: Map<number, string>;
  emptyGlyph: string;
}

export function buildLegend(tiles: TileInfo[]): Legend {
  const glyphToId = new Map<string, number>();
  const idToGlyph = new Map<number, string>();
  for (const t of tiles) {
    if (t.glyph.length !== 1 || glyphToId.has(t.glyph) || idToGlyph.has(t.id)) {
      throw new Error(`legend entry ${t.id} (${JSON.stringify(t.glyph)}) is not unique`);
    }
    glyphToId.set(t.glyph, t.id);
    idToGlyph.set(t.id, t.glyph);
  }
  const emptyGlyph = idToGlyph.get(EMPTY_TILE);
  if (emptyGlyph === undefined) {
    throw new Error(`legend has no glyph for the empty tile (id ${EMPTY_TILE})`);
  }
  return { glyphToId, idToGlyph, emptyGlyph };
}

export function emptyRows(width: number, height: number, legend: Legend): string[] {
  return Array.from({ length: height }, () => legend.emptyGlyph.repeat(width));
}

export function gridSize(rows: string[]): { width: number; height: number } {
  if (rows.length === 0) {
    throw new Error("level has no rows");
  }
  const width = rows[0]!.length;
  for (const row of rows) {
    if (row.length !== width) {
      throw new Error("level rows differ in length");
    }
  }
  return { width, height: rows.length };
}

export function cellId(rows: string[], legend: Legend, x: number, y: number): number {
  const { width, height } = gridSize(rows);
  if (x < 0 || x >= width || y < 0 || y >= height) {
    throw new Error(`(${x}, ${y}) outside ${width}x${height} grid`);
  }
  const glyph = rows[y]!.charAt(x);
  const id = legend.glyphToId.get(glyph);
  if (id === undefined) {
    throw new Error(`unknown glyph ${JSON.stringify(glyph)} at (${x}, ${y})`);
  }
  return id;
}

function setGlyph(rows: string[], x: number, y: number, glyph: string): string[] {
  const out = rows.slice();
  const row = out[y]!;
  out[y] = row.slice(0, x) + glyph + row.slice(x + 1);
  return out;
}

/**
 * Apply a list of changes, enforcing the same rules the service does: every
 * coordinate in bounds, at most one change per cell, and each `before` equal
 * to the current cell.  Returns a new rows array.
 */
export function applyChanges(rows: string[], legend: Legend, changes: ChangeTuple[]): string[] {
  let out = rows;
  const seen = new Set<string>();
  for (const [x, y, before, after] of changes) {
    const key = `${x},${y}`;
    if (seen.has(key)) {
      throw new Error(`two changes touch cell (${x}, ${y})`);
    }
    seen.add(key);
    const current = cellId(out, legend, x, y);
    if (current !== before) {
      throw new Error(`change at (${x}, ${y}) expects tile ${before} but found ${current}`);
    }
    const glyph = legend.idToGlyph.get(after);
    if (glyph === undefined) {
      throw new Error(`no glyph for tile ${after}`);
    }
    out = setGlyph(out === rows ? rows.slice() : out, x, y, glyph);
  }
  return out === rows ? rows.slice() : out;
}

/**
 * Merge raw edits into one change per cell: the first `before` wins, the last
 * `after` wins, and edits that land back on their starting tile drop out.
 * Entries come back row-major so a merged turn serializes deterministically.
 */
export function coalesceChanges(changes: ChangeTuple[]): ChangeTuple[] {
  const byCell = new Map<string, ChangeTuple>();
  for (const [x, y, before, after] of changes) {
    const key = `${x},${y}`;
    const prior = byCell.get(key);
    if (prior === undefined) {
      byCell.set(key, [x, y, before, after]);
    } else {
      prior[3] = after;
    }
  }
  const merged = [...byCell.values()].filter(([, , before, after]) => before !== after);
  merged.sort((a, b) => (a[1] - b[1]) || (a[0] - b[0]));
  return merged;
}

export function rowsToIds(rows: string[], legend: Legend): number[][] {
  const { width, height } = gridSize(rows);
  const ids: number[][] = [];
  for (let y = 0; y < height; y++) {
    const line: number[] = [];
    for (let x = 0; x < width; x++) {
      line.push(cellId(rows, legend, x, y));
    }
    ids.push(line);
  }
  return ids;
}

/** Render a changeset's `after` tiles on an all-empty canvas of id rows. */
export function changesCanvas(changes: ChangeTuple[], width: number, height: number): number[][] {
  const ids: number[][] = Array.from({ length: height }, () => new Array<number>(width).fill(EMPTY_TILE));
  for (const [x, y, , after] of changes) {
    if (x < 0 || x >= width || y < 0 || y >= height) {
      throw new Error(`(${x}, ${y}) outside ${width}x${height} canvas`);
    }
    ids[y]![x] = after;
  }
  return ids;
}

export interface PatchWindow {
  x: number;
  y: number;
  /** The window's nine tile IDs, row-major, joined into a map key. */
  key: string;
}

/** All 3x3 windows with at least one non-empty cell, enumerated row-major. */
export function patchWindows(ids: number[][]): PatchWindow[] {
  const height = ids.length;
  const width = height > 0 ? ids[0]!.length : 0;
  if (width < 3 || height < 3) {
    throw new Error("patch extraction needs at least a 3x3 grid");
  }
  const out: PatchWindow[] = [];
  for (let y = 0; y + 3 <= height; y++) {
    for (let x = 0; x + 3 <= width; x++) {
      const cells: number[] = [];
      let nonEmpty = false;
      for (let dy = 0; dy < 3; dy++) {
        for (let dx = 0; dx < 3; dx++) {
          const v = ids[y + dy]![x + dx]!;
          cells.push(v);
          nonEmpty = nonEmpty || v !== EMPTY_TILE;
        }
      }
      if (nonEmpty) {
        out.push({ x, y, key: cells.join(",") });
      }
    }
  }
  return out;
}

export interface PatchMatch {
  /** Windows of `levelIds` consumed by the multiset intersection. */
  windows: PatchWindow[];
  matched: number;
  actionPatchCount: number;
}

/**
 * Multiset intersection of the level's patches with the action's patches.
 *
 * Each action patch can be consumed by at most one level window and vice
 * versa; level windows are consumed first-come in row-major order.  The
 * matched count over `actionPatchCount` is the overlap score the evaluation
 * reports for this level/action pair.
 */
export function matchPatches(levelIds: number[][], actionIds: number[][]): PatchMatch {
  const budget = new Map<string, number>();
  const actionPatches = patchWindows(actionIds);
  for (const p of actionPatches) {
    budget.set(p.key, (budget.get(p.key) ?? 0) + 1);
  }
  const windows: PatchWindow[] = [];
  for (const w of patchWindows(levelIds)) {
    const left = budget.get(w.key) ?? 0;
    if (left > 0) {
      budget.set(w.key, left - 1);
      windows.push(w);
    }
  }
  return { windows, matched: windows.length, actionPatchCount: actionPatches.length };
}
