/**
 * The three figure kinds.
 *
 * k-profiles: per-layer squeeze exponent k against rescaled epoch time
 * (t - t_n)/(1 - t_n), overlaid on the ideal tent profile
 * k_max (1 - |1 - 2 that|) with k_max = sqrt(4/3) - 1.  The measured desk
 * curves sit at or below the tent.
 *
 * convergence: iteration distance on a log scale with the 0.9^k reference
 * line anchored at the first distance; ratios above one get a warning
 * annotation.
 *
 * fields: heatmap of a grid dump; fields that change sign use a symmetric
 * diverging scale (odd fields render antisymmetrically), non-negative
 * ones a sequential scale.
 */

import { basename } from "path";
import { column, readCsv, readGridDump, Table } from "./data.js";
import {
  HEIGHT,
  MARGIN,
  PALETTE,
  Svg,
  WIDTH,
  divergingColor,
  linearScale,
  sequentialColor,
} from "./svg.js";

export const K_MAX = Math.sqrt(4 / 3) - 1;

export interface KCurve {
  label: string;
  that: number[];
  k: number[];
}

export function kProfileCurves(paths: string[]): KCurve[] {
  if (paths.length === 0) throw new Error("no layer CSVs given");
  return paths.map((p) => {
    const t = readCsv(p);
    const ts = column(t, "t", p);
    const ks = column(t, "k", p);
    const t0 = ts[0];
    const span = 1 - t0 || 1;
    return {
      label: basename(p).replace(/\.csv$/, ""),
      that: ts.map((v) => (v - t0) / span),
      k: ks,
    };
  });
}

export function tentProfile(that: number): number {
  return K_MAX * (1 - Math.abs(1 - 2 * that));
}

export function plotKProfiles(paths: string[]): string {
  const curves = kProfileCurves(paths);
  let kLo = 0;
  let kHi = K_MAX;
  for (const c of curves) {
    for (const v of c.k) {
      kLo = Math.min(kLo, v);
      kHi = Math.max(kHi, v);
    }
  }
  const pad = 0.06 * (kHi - kLo || 1);
  kLo -= pad;
  kHi += pad;
  const svg = new Svg();
  const xs = linearScale(0, 1, MARGIN.left, WIDTH - MARGIN.right);
  const ys = linearScale(kLo, kHi, HEIGHT - MARGIN.bottom, MARGIN.top);
  svg.axes(xs, ys, 0, 1, kLo, kHi, "rescaled epoch time", "squeeze exponent k");
  const tent: Array<[number, number]> = [];
  for (let i = 0; i <= 200; i++) {
    const th = i / 200;
    tent.push([xs(th), ys(tentProfile(th))]);
  }
  svg.polyline(tent, "#555555", 1.5, "6,4");
  svg.text(xs(0.5), ys(K_MAX) - 8, "ideal tent", { anchor: "middle", fill: "#555555" });
  curves.forEach((c, i) => {
    const color = PALETTE[i % PALETTE.length];
    svg.polyline(c.that.map((th, j) => [xs(th), ys(c.k[j])] as [number, number]), color);
    svg.text(WIDTH - MARGIN.right - 8, MARGIN.top + 16 * (i + 1), c.label, {
      anchor: "end",
      fill: color,
    });
  });
  return svg.render();
}

export function plotConvergence(path: string): string {
  const t = readCsv(path);
  const iters = column(t, "iter", path);
  const dist = column(t, "distance", path);
  const ratios = column(t, "ratio", path);
  if (iters.length === 0) throw new Error(`${path}: no iterations`);
  const pos = dist.filter((d) => d > 0);
  const dLo = pos.length ? Math.min(...pos) : 1e-16;
  const dHi = Math.max(...dist, dLo * 10);
  const svg = new Svg();
  const xs = linearScale(0, Math.max(...iters, 1), MARGIN.left, WIDTH - MARGIN.right);
  const ys = linearScale(Math.log10(dLo), Math.log10(dHi), HEIGHT - MARGIN.bottom, MARGIN.top);
  svg.axes(xs, ys, 0, Math.max(...iters, 1), dLo, dHi, "iteration", "sup distance", true);
  const ref: Array<[number, number]> = [];
  for (const i of iters) {
    const v = dHi * Math.pow(0.9, i);
    if (v >= dLo) ref.push([xs(i), ys(Math.log10(v))]);
  }
  svg.polyline(ref, "#888888", 1.2, "5,4");
  svg.text(WIDTH - MARGIN.right - 8, MARGIN.top + 14, "0.9^k reference", {
    anchor: "end",
    fill: "#888888",
  });
  const pts: Array<[number, number]> = [];
  iters.forEach((i, j) => {
    if (dist[j] > 0) pts.push([xs(i), ys(Math.log10(dist[j]))]);
  });
  if (pts.length > 1) svg.polyline(pts, PALETTE[0]);
  for (const [px, py] of pts) svg.circle(px, py, 2.4, PALETTE[0]);
  const bad = ratios.some((r) => Number.isFinite(r) && r > 1);
  if (bad) {
    svg.text(MARGIN.left + 8, MARGIN.top + 14, "warning: ratio above 1 observed", {
      fill: "#d62728",
    });
  }
  return svg.render();
}

export function plotField(base: string, maxCells = 128): string {
  const dump = readGridDump(base);
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of dump.values) {
    for (const v of row) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  const signChanging = lo < 0 && hi > 0;
  const amp = Math.max(Math.abs(lo), Math.abs(hi)) || 1;
  const sx = Math.max(1, Math.ceil(dump.nx / maxCells));
  const sy = Math.max(1, Math.ceil(dump.ny / maxCells));
  const ncx = Math.floor((dump.nx - 1) / sx) + 1;
  const ncy = Math.floor((dump.ny - 1) / sy) + 1;
  const svg = new Svg();
  const x0 = MARGIN.left;
  const y0 = MARGIN.top;
  const w = (WIDTH - MARGIN.left - MARGIN.right) / ncx;
  const h = (HEIGHT - MARGIN.top - MARGIN.bottom) / ncy;
  for (let jy = 0; jy < ncy; jy++) {
    for (let jx = 0; jx < ncx; jx++) {
      const v = dump.values[jy * sy][jx * sx];
      const color = signChanging
        ? divergingColor(v / amp)
        : sequentialColor((v - lo) / (hi - lo || 1));
      // flip so y grows upward
      svg.rect(x0 + jx * w, y0 + (ncy - 1 - jy) * h, w + 0.5, h + 0.5, color);
    }
  }
  svg.text(
    WIDTH / 2,
    HEIGHT - 12,
    `${dump.fieldName}  t=${dump.t.toPrecision(6)}  [${dump.xMin}, ${dump.xMax}] x [${dump.yMin}, ${dump.yMax}]  range ${lo.toExponential(3)} .. ${hi.toExponential(3)}`,
    { anchor: "middle", size: 11 }
  );
  return svg.render();
}
