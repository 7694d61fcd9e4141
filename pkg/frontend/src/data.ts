/**
 * Readers for the solver's documented artifact formats.
 *
 * CSV: plain comma-separated with a header row, numeric columns formatted
 * with repr-style precision.  Grid dumps: <base>.f64 (raw little-endian
 * float64, row-major, x1 fastest) + <base>.meta (key=value sidecar with
 * nx, ny, x_min, x_max, y_min, y_max, t, field_name).
 *
 * Renderers never recompute physics; they consume these files as-is.
 */

import { readFileSync } from "fs";

export interface Table {
  columns: string[];
  rows: number[][];
}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf-8").trim();
  if (text.length === 0) {
    throw new Error(`empty CSV: ${path}`);
  }
  const lines = text.split(/\r?\n/);
  const columns = lines[0].split(",").map((s) => s.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    if (!lines[i].trim()) continue;
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new Error(`${path}:${i + 1}: expected ${columns.length} fields`);
    }
    rows.push(parts.map((p) => Number(p)));
  }
  return { columns, rows };
}

export function column(t: Table, name: string, path = "<csv>"): number[] {
  const j = t.columns.indexOf(name);
  if (j < 0) {
    throw new Error(`${path}: missing column '${name}' (has: ${t.columns.join(", ")})`);
  }
  return t.rows.map((r) => r[j]);
}

export interface GridDump {
  nx: number;
  ny: number;
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
  t: number;
  fieldName: string;
  /** values[iy][ix] */
  values: Float64Array[];
}

export function readGridDump(base: string): GridDump {
  const metaText = readFileSync(`${base}.meta`, "utf-8");
  const meta: Record<string, string> = {};
  for (const line of metaText.split(/\r?\n/)) {
    if (!line.trim()) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`${base}.meta: bad line '${line}'`);
    meta[line.slice(0, eq)] = line.slice(eq + 1);
  }
  for (const key of ["nx", "ny", "x_min", "x_max", "y_min", "y_max", "t", "field_name"]) {
    if (!(key in meta)) throw new Error(`${base}.meta: missing ${key}`);
  }
  const nx = Number(meta.nx);
  const ny = Number(meta.ny);
  const raw = readFileSync(`${base}.f64`);
  if (raw.byteLength !== nx * ny * 8) {
    throw new Error(
      `${base}.f64: ${raw.byteLength} bytes, expected ${nx * ny * 8}`
    );
  }
  const flat = new Float64Array(raw.buffer, raw.byteOffset, nx * ny);
  const values: Float64Array[] = [];
  for (let iy = 0; iy < ny; iy++) {
    values.push(flat.slice(iy * nx, (iy + 1) * nx));
  }
  return {
    nx,
    ny,
    xMin: Number(meta.x_min),
    xMax: Number(meta.x_max),
    yMin: Number(meta.y_min),
    yMax: Number(meta.y_max),
    t: Number(meta.t),
    fieldName: meta.field_name,
    values,
  };
}
