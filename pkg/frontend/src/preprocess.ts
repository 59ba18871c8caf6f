/**
 * CIR preprocessing that mirrors the producer side of the fingerprint files,
 * so a model served here sees inputs built exactly the way its training data
 * was built: per-radio-unit peak alignment, column crop, normalization by a
 * stored factor, then row masking by normalized peak height.
 */

import { AntennaRef } from "./fingerprint";

export class PreprocessError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "PreprocessError";
  }
}

/** Magnitudes of interleaved re/im pairs (length 2n in, n out). */
export function complexMagnitudes(interleaved: Float64Array): Float64Array {
  const n = interleaved.length >> 1;
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = Math.hypot(interleaved[2 * i], interleaved[2 * i + 1]);
  }
  return out;
}

/** Index of the largest value; ties resolve to the lowest index. */
export function argmaxLowestTie(row: Float64Array): number {
  let best = 0;
  for (let i = 1; i < row.length; i++) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

export interface FrameRow {
  ru: number;
  antenna: number;
  mags: Float64Array;
}

/**
 * Shift every row of one radio unit left by the earliest peak among its
 * rows, zero-filling the tail. Row width is unchanged and intra-unit peak
 * spacing is preserved. Rows must already belong to a single unit.
 */
export function alignUnit(rows: FrameRow[]): FrameRow[] {
  if (rows.length === 0) {
    throw new PreprocessError("no rows to align");
  }
  const units = new Set(rows.map((r) => r.ru));
  if (units.size !== 1) {
    throw new PreprocessError(
      `rows span radio units ${[...units].sort().join(", ")}`,
    );
  }
  const width = rows[0].mags.length;
  for (const r of rows) {
    if (r.mags.length !== width) {
      throw new PreprocessError("rows have differing lengths");
    }
    let any = false;
    for (let i = 0; i < r.mags.length; i++) {
      if (r.mags[i] !== 0) {
        any = true;
        break;
      }
    }
    if (!any) {
      throw new PreprocessError(
        `all-zero frame from antenna (${r.ru}, ${r.antenna})`,
      );
    }
  }
  const shift = Math.min(...rows.map((r) => argmaxLowestTie(r.mags)));
  return rows.map((r) => {
    const shifted = new Float64Array(width);
    shifted.set(r.mags.subarray(shift));
    return { ru: r.ru, antenna: r.antenna, mags: shifted };
  });
}

export interface ImageOptions {
  alphaNorm: number;
  gamma: number;
  columns: number;
  rowOrder: ReadonlyArray<AntennaRef>;
}

export interface InputImage {
  /** Row-major rowOrder.length * columns normalized magnitudes. */
  values: Float64Array;
  /** 1 = row kept, 0 = row zeroed because its peak failed the threshold. */
  mask: Uint8Array;
  rows: number;
  columns: number;
}

/**
 * Build one model input from the magnitude rows of a single timestep.
 *
 * Rows are grouped by radio unit and peak-aligned per unit, laid out in the
 * given row order, cropped to the first `columns` delay bins, divided by
 * `alphaNorm`, and finally rows whose normalized peak is <= gamma are zeroed.
 * Values above 1 pass through untouched.
 */
export function buildImage(rows: FrameRow[], opts: ImageOptions): InputImage {
  if (opts.columns < 1) {
    throw new PreprocessError("columns must be >= 1");
  }
  const byUnit = new Map<number, FrameRow[]>();
  for (const r of rows) {
    const group = byUnit.get(r.ru);
    if (group) group.push(r);
    else byUnit.set(r.ru, [r]);
  }
  const aligned = new Map<string, Float64Array>();
  for (const [, group] of byUnit) {
    group.sort((a, b) => a.antenna - b.antenna);
    for (const r of alignUnit(group)) {
      aligned.set(`${r.ru}:${r.antenna}`, r.mags);
    }
  }

  const nRows = opts.rowOrder.length;
  const values = new Float64Array(nRows * opts.columns);
  const mask = new Uint8Array(nRows);
  for (let i = 0; i < nRows; i++) {
    const [ru, antenna] = opts.rowOrder[i];
    const row = aligned.get(`${ru}:${antenna}`);
    if (row === undefined) {
      throw new PreprocessError(`no frame for antenna (${ru}, ${antenna})`);
    }
    if (row.length < opts.columns) {
      throw new PreprocessError(
        `rows have ${row.length} columns, need >= ${opts.columns}`,
      );
    }
    let peak = 0;
    const base = i * opts.columns;
    for (let j = 0; j < opts.columns; j++) {
      const v = row[j] / opts.alphaNorm;
      values[base + j] = v;
      if (v > peak) peak = v;
    }
    if (peak > opts.gamma) {
      mask[i] = 1;
    } else {
      values.fill(0, base, base + opts.columns);
    }
  }
  return { values, mask, rows: nRows, columns: opts.columns };
}
