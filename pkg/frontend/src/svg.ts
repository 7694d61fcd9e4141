/**
 * Minimal deterministic SVG builder: fixed canvas, fixed palette, numbers
 * formatted with a fixed precision so identical inputs give identical
 * bytes.  No timestamps, no randomness.
 */

export const WIDTH = 760;
export const HEIGHT = 520;
export const MARGIN = { left: 64, right: 20, top: 28, bottom: 46 };

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const s = v.toFixed(3);
  return s === "-0.000" ? "0.000" : s;
}

export interface Scale {
  (v: number): number;
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function ticks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const s = err >= 7.5 ? step * 10 : err >= 3.5 ? step * 5 : err >= 1.5 ? step * 2 : step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    out.push(v);
  }
  return out;
}

export class Svg {
  private parts: string[] = [];

  constructor(public width = WIDTH, public height = HEIGHT) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica,Arial,sans-serif">`
    );
    this.parts.push(`<rect width="${width}" height="${height}" fill="#ffffff"/>`);
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"${d}/>`
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, width = 1.5, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    const coords = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${coords}" fill="none" stroke="${stroke}" stroke-width="${width}"${d}/>`
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${fmt(r)}" fill="${fill}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`
    );
  }

  text(x: number, y: number, s: string, opts: { size?: number; anchor?: string; fill?: string } = {}): void {
    const { size = 12, anchor = "start", fill = "#222222" } = opts;
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}" fill="${fill}">${escapeXml(s)}</text>`
    );
  }

  axes(xs: Scale, ys: Scale, xlo: number, xhi: number, ylo: number, yhi: number,
       xlabel: string, ylabel: string, logY = false): void {
    const x0 = MARGIN.left;
    const x1 = this.width - MARGIN.right;
    const y0 = this.height - MARGIN.bottom;
    const y1 = MARGIN.top;
    this.line(x0, y0, x1, y0, "#222222");
    this.line(x0, y0, x0, y1, "#222222");
    for (const v of ticks(xlo, xhi)) {
      const px = xs(v);
      this.line(px, y0, px, y0 + 4, "#222222");
      this.text(px, y0 + 18, trimTick(v), { anchor: "middle", size: 11 });
    }
    const yticks = logY ? logTicks(ylo, yhi) : ticks(ylo, yhi);
    for (const v of yticks) {
      const py = ys(logY ? Math.log10(v) : v);
      this.line(x0 - 4, py, x0, py, "#222222");
      this.text(x0 - 8, py + 4, logY ? `1e${Math.round(Math.log10(v))}` : trimTick(v), {
        anchor: "end",
        size: 11,
      });
    }
    this.text((x0 + x1) / 2, this.height - 10, xlabel, { anchor: "middle" });
    this.raw(
      `<text x="16" y="${fmt((y0 + y1) / 2)}" font-size="12" text-anchor="middle" ` +
        `fill="#222222" transform="rotate(-90 16 ${fmt((y0 + y1) / 2)})">${escapeXml(ylabel)}</text>`
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); e <= Math.floor(Math.log10(hi)); e++) {
    out.push(Math.pow(10, e));
  }
  return out.length ? out : [lo];
}

function trimTick(v: number): string {
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e4 || a < 1e-3)) return v.toExponential(1);
  return String(Number(v.toPrecision(6)));
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Diverging blue-white-red map on [-1, 1]; deterministic hex output. */
export function divergingColor(v: number): string {
  const t = Math.max(-1, Math.min(1, v));
  let r: number, g: number, b: number;
  if (t < 0) {
    r = Math.round(255 * (1 + t));
    g = Math.round(255 * (1 + t * 0.55));
    b = 255;
  } else {
    r = 255;
    g = Math.round(255 * (1 - t * 0.55));
    b = Math.round(255 * (1 - t));
  }
  return `#${hex(r)}${hex(g)}${hex(b)}`;
}

/** Sequential white-to-blue map on [0, 1]. */
export function sequentialColor(v: number): string {
  const t = Math.max(0, Math.min(1, v));
  const r = Math.round(255 * (1 - 0.85 * t));
  const g = Math.round(255 * (1 - 0.55 * t));
  return `#${hex(r)}${hex(g)}ff`;
}

function hex(v: number): string {
  return v.toString(16).padStart(2, "0");
}
