/**
 * Minimal string-based SVG composition: scales, axes, and the handful of
 * marks the figures need. No DOM, no external renderer; the output is a
 * standalone SVG document.
 */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 30, right: 20, bottom: 45, left: 55 };

/** Categorical palette (one entry per action, cycled). */
export const COLORS = [
  "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

export type Scale = (x: number) => number;

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (x) => r0 + ((x - d0) / span) * (r1 - r0);
}

export function log10Scale(d0: number, d1: number, r0: number, r1: number): Scale {
  const base = linearScale(Math.log10(d0), Math.log10(d1), r0, r1);
  return (x) => base(Math.log10(x));
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

const fmt = (x: number) => (Math.abs(x) < 1e-12 ? "0" : +x.toFixed(3) + "");

export function line(
  x1: number, y1: number, x2: number, y2: number,
  stroke: string, width = 1, dash = "",
): string {
  const d = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`;
}

export function polyline(
  pts: Array<[number, number]>, stroke: string, width = 1.5, dash = "",
): string {
  const d = dash ? ` stroke-dasharray="${dash}"` : "";
  const coords = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return `<polyline points="${coords}" fill="none" stroke="${stroke}" stroke-width="${width}"${d}/>`;
}

export function circle(cx: number, cy: number, r: number, fill: string): string {
  return `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${r}" fill="${fill}"/>`;
}

export function rect(
  x: number, y: number, w: number, h: number, fill: string,
): string {
  return `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`;
}

export function text(
  x: number, y: number, content: string,
  opts: { size?: number; anchor?: string; rotate?: number } = {},
): string {
  const { size = 11, anchor = "middle", rotate } = opts;
  const tr = rotate ? ` transform="rotate(${rotate} ${fmt(x)} ${fmt(y)})"` : "";
  return `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}" font-family="sans-serif"${tr}>${esc(content)}</text>`;
}

/** An arrow segment with a simple triangular head. */
export function arrow(
  x1: number, y1: number, x2: number, y2: number, stroke: string,
): string {
  const dx = x2 - x1;
  const dy = y2 - y1;
  const len = Math.hypot(dx, dy);
  if (len < 1e-9) return "";
  const ux = dx / len;
  const uy = dy / len;
  const head = Math.min(3, len * 0.4);
  const hx = x2 - head * ux;
  const hy = y2 - head * uy;
  const left = `${fmt(hx - head * 0.5 * uy)},${fmt(hy + head * 0.5 * ux)}`;
  const right = `${fmt(hx + head * 0.5 * uy)},${fmt(hy - head * 0.5 * ux)}`;
  return (
    line(x1, y1, x2, y2, stroke, 0.8) +
    `<polygon points="${fmt(x2)},${fmt(y2)} ${left} ${right}" fill="${stroke}"/>`
  );
}

export interface AxisSpec {
  x0: number; x1: number; y0: number; y1: number;   // pixel box (y0 = top)
  xTicks: Array<[number, string]>;                  // [pixel, label]
  yTicks: Array<[number, string]>;
  xLabel?: string;
  yLabel?: string;
  title?: string;
}

/** Axis lines, ticks, labels, and an optional panel title. */
export function axes(s: AxisSpec): string {
  const parts: string[] = [];
  parts.push(line(s.x0, s.y1, s.x1, s.y1, "#000"));
  parts.push(line(s.x0, s.y0, s.x0, s.y1, "#000"));
  for (const [px, label] of s.xTicks) {
    parts.push(line(px, s.y1, px, s.y1 + 4, "#000"));
    parts.push(text(px, s.y1 + 16, label));
  }
  for (const [py, label] of s.yTicks) {
    parts.push(line(s.x0 - 4, py, s.x0, py, "#000"));
    parts.push(text(s.x0 - 7, py + 3.5, label, { anchor: "end" }));
  }
  if (s.xLabel) parts.push(text((s.x0 + s.x1) / 2, s.y1 + 34, s.xLabel, { size: 12 }));
  if (s.yLabel) {
    parts.push(
      text(s.x0 - 40, (s.y0 + s.y1) / 2, s.yLabel, { size: 12, rotate: -90 }),
    );
  }
  if (s.title) parts.push(text((s.x0 + s.x1) / 2, s.y0 - 10, s.title, { size: 13 }));
  return parts.join("\n");
}

/** Round tick values covering [lo, hi]. */
export function ticks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo || 1;
  const step = 10 ** Math.floor(Math.log10(span / count));
  const candidates = [step, 2 * step, 2.5 * step, 5 * step, 10 * step];
  const chosen = candidates.find((s) => span / s <= count) ?? 10 * step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / chosen) * chosen; v <= hi + 1e-9; v += chosen) {
    out.push(+v.toFixed(10));
  }
  return out;
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}
