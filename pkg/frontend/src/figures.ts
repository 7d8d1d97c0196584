/**
 * Figure renderers. Each one reads versioned CSV artifacts from an input
 * directory and returns a standalone SVG document string. Every number shown
 * comes from a CSV column written by the simulation package; nothing is
 * recomputed here.
 */
import { join } from "node:path";
import { CsvError, distinct, num, readArtifact, str, type Row } from "./csv.js";
import {
  arrow, axes, circle, COLORS, DEFAULT_MARGIN, line, linearScale,
  log10Scale, polyline, rect, svgDocument, text, ticks, type Scale,
} from "./svg.js";

export type FigureId = "fig2" | "fig3" | "fig4" | "fig6" | "fig8";

const PANEL_W = 320;
const PANEL_H = 260;

function panelBox(index: number) {
  const m = DEFAULT_MARGIN;
  const x0 = m.left + index * (PANEL_W + 30);
  return { x0, x1: x0 + PANEL_W, y0: m.top, y1: m.top + PANEL_H };
}

function docSize(nPanels: number): [number, number] {
  const m = DEFAULT_MARGIN;
  return [
    m.left + nPanels * (PANEL_W + 30) - 30 + m.right,
    m.top + PANEL_H + m.bottom,
  ];
}

function logTicks(betas: number[], sx: Scale): Array<[number, string]> {
  const decades = new Set(betas.map((b) => Math.round(Math.log10(b))));
  return [...decades]
    .sort((a, b) => a - b)
    .map((d) => [sx(10 ** d), `1e${d}`]);
}

function linTicks(lo: number, hi: number, s: Scale): Array<[number, string]> {
  return ticks(lo, hi).map((v) => [s(v), String(v)]);
}

/** Grouped bars of the limiting choice distribution, one panel per regime. */
export function renderFig2(inDir: string): string {
  const rows = readArtifact(join(inDir, "theory.csv"), "theory-v1", [
    "k", "lambda_k", "c_abundant", "c_deficient",
  ]);
  const panels: Array<[string, string]> = [
    ["c_abundant", "abundant attractiveness"],
    ["c_deficient", "deficient attractiveness"],
  ];
  const parts: string[] = [];
  panels.forEach(([col, title], pi) => {
    const box = panelBox(pi);
    const sy = linearScale(0, 1, box.y1, box.y0);
    const slot = PANEL_W / rows.length;
    rows.forEach((row, i) => {
      const v = num(row, col);
      const x = box.x0 + i * slot + slot * 0.2;
      parts.push(rect(x, sy(v), slot * 0.6, box.y1 - sy(v), COLORS[i % COLORS.length]!));
    });
    parts.push(axes({
      ...box,
      xTicks: rows.map((row, i) => [box.x0 + (i + 0.5) * slot, `k=${num(row, "k")}`]),
      yTicks: linTicks(0, 1, sy),
      yLabel: pi === 0 ? "limiting choice probability" : undefined,
      title,
    }));
  });
  const [w, h] = docSize(2);
  return svgDocument(w, h, parts.join("\n"));
}

interface SweepCurveOpts {
  rows: Row[];
  box: { x0: number; x1: number; y0: number; y1: number };
  title?: string;
  yLabel?: string;
}

/** Choice fraction vs update rate with the two limit overlays per action. */
function sweepPanel({ rows, box, title, yLabel }: SweepCurveOpts): string {
  const betas = distinct<number>(rows, "beta").sort((a, b) => a - b);
  const ks = distinct<number>(rows, "k").sort((a, b) => a - b);
  const sx = log10Scale(betas[0]!, betas[betas.length - 1]!, box.x0, box.x1);
  const sy = linearScale(0, 1, box.y1, box.y0);
  const parts: string[] = [];
  ks.forEach((k, ki) => {
    const color = COLORS[ki % COLORS.length]!;
    const sub = rows.filter((r) => r.k === k);
    const byBeta = new Map(sub.map((r) => [num(r, "beta"), r]));
    const pts: Array<[number, number]> = betas.map((b) => {
      const row = byBeta.get(b);
      if (!row) throw new CsvError(`missing row for beta=${b}, k=${k}`);
      return [sx(b), sy(num(row, "choice_frac"))];
    });
    parts.push(polyline(pts, color, 1.8));
    for (const b of betas) {
      const row = byBeta.get(b)!;
      const se = num(row, "choice_se");
      const y = sy(num(row, "choice_frac"));
      parts.push(line(sx(b), sy(num(row, "choice_frac") - se), sx(b), sy(num(row, "choice_frac") + se), color, 1));
      parts.push(circle(sx(b), y, 2.2, color));
    }
    // limit overlays come straight from the artifact's theory columns
    const cAb = num(sub[0]!, "c_abundant");
    const cDef = num(sub[0]!, "c_deficient");
    parts.push(line(box.x0, sy(cAb), box.x1, sy(cAb), color, 1, "5,3"));
    parts.push(line(box.x0, sy(cDef), box.x1, sy(cDef), color, 1, "1.5,3"));
  });
  parts.push(axes({
    ...box,
    xTicks: logTicks(betas, sx),
    yTicks: linTicks(0, 1, sy),
    xLabel: "update rate",
    yLabel,
    title,
  }));
  return parts.join("\n");
}

/** Steady-state choice fractions across the update-rate grid. */
export function renderFig3(inDir: string): string {
  const rows = readArtifact(join(inDir, "sweep.csv"), "sweep-v1", [
    "beta", "k", "choice_frac", "choice_se", "c_abundant", "c_deficient",
  ]);
  const [w, h] = docSize(1);
  return svgDocument(w, h, sweepPanel({
    rows,
    box: panelBox(0),
    yLabel: "choice fraction",
    title: "steady state vs update rate",
  }));
}

/** Scaled stochastic paths (solid) against the fluid solution (dashed). */
export function renderFig4(inDir: string): string {
  const rows = readArtifact(join(inDir, "trajectories.csv"), "trajpair-v1", [
    "m", "seed", "source", "t", "q_1",
  ]);
  const qCols = Object.keys(rows[0]!).filter((c) => /^q_\d+$/.test(c));
  const fluidRows = rows.filter((r) => r.source === "fluid");
  const ms = distinct<number>(rows.filter((r) => r.source === "stochastic"), "m")
    .sort((a, b) => a - b);
  if (fluidRows.length === 0 || ms.length === 0) {
    throw new CsvError("trajectories.csv needs both fluid and stochastic rows");
  }
  const tMax = Math.max(...rows.map((r) => num(r, "t")));
  const qMax = Math.max(
    ...rows.flatMap((r) => qCols.map((c) => num(r, c))),
  );
  const parts: string[] = [];
  ms.forEach((m, pi) => {
    const box = panelBox(pi);
    const sx = linearScale(0, tMax, box.x0, box.x1);
    const sy = linearScale(0, qMax * 1.05, box.y1, box.y0);
    const sub = rows.filter((r) => r.source === "stochastic" && r.m === m);
    qCols.forEach((col, ki) => {
      const color = COLORS[ki % COLORS.length]!;
      parts.push(polyline(sub.map((r) => [sx(num(r, "t")), sy(num(r, col))]), color, 1.2));
      parts.push(polyline(
        fluidRows.map((r) => [sx(num(r, "t")), sy(num(r, col))]), color, 1.5, "6,4",
      ));
    });
    parts.push(axes({
      ...box,
      xTicks: linTicks(0, tMax, sx),
      yTicks: linTicks(0, qMax, sy),
      xLabel: "scaled time",
      yLabel: pi === 0 ? "scaled recallable rewards" : undefined,
      title: `m = ${m}`,
    }));
  });
  const [w, h] = docSize(ms.length);
  return svgDocument(w, h, parts.join("\n"));
}

export interface DriftSample {
  q1: number;
  q2: number;
  dq1: number;
  dq2: number;
}

/** Bilinear interpolation of the drift field at an arbitrary point. */
export function interpolateDrift(
  samples: DriftSample[], q1: number, q2: number,
): [number, number] {
  const axis1 = [...new Set(samples.map((s) => s.q1))].sort((a, b) => a - b);
  const axis2 = [...new Set(samples.map((s) => s.q2))].sort((a, b) => a - b);
  const bracket = (axis: number[], v: number): [number, number] => {
    let i = axis.findIndex((a) => a > v);
    if (i <= 0) i = i === 0 ? 1 : axis.length - 1;
    return [axis[i - 1]!, axis[i]!];
  };
  const [a1, b1] = bracket(axis1, q1);
  const [a2, b2] = bracket(axis2, q2);
  const at = (x: number, y: number): DriftSample => {
    const hit = samples.find((s) => s.q1 === x && s.q2 === y);
    if (!hit) throw new CsvError(`drift grid has no sample at (${x}, ${y})`);
    return hit;
  };
  const u = (q1 - a1) / (b1 - a1 || 1);
  const v = (q2 - a2) / (b2 - a2 || 1);
  const corners = [at(a1, a2), at(b1, a2), at(a1, b2), at(b1, b2)];
  const weights = [(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v];
  let d1 = 0;
  let d2 = 0;
  corners.forEach((c, i) => {
    d1 += weights[i]! * c.dq1;
    d2 += weights[i]! * c.dq2;
  });
  return [d1, d2];
}

export function loadDriftField(inDir: string): DriftSample[] {
  const rows = readArtifact(join(inDir, "vfield.csv"), "vfield-v1", [
    "q1", "q2", "dq1", "dq2",
  ]);
  return rows.map((r) => ({
    q1: num(r, "q1"), q2: num(r, "q2"), dq1: num(r, "dq1"), dq2: num(r, "dq2"),
  }));
}

export function loadInvariantStates(inDir: string): Row[] {
  return readArtifact(join(inDir, "states.csv"), "states-v1", [
    "state", "q1", "q2", "stability",
  ]);
}

/** Invariant states across exponents plus the two-action drift field. */
export function renderFig6(inDir: string): string {
  const etaRows = readArtifact(join(inDir, "eta.csv"), "eta-v1", [
    "eta", "state", "stability", "k", "q",
  ]);
  const field = loadDriftField(inDir);
  const states = loadInvariantStates(inDir);

  const parts: string[] = [];

  // left panel: invariant-state coordinates against the exponent
  const left = panelBox(0);
  const etas = distinct<number>(etaRows, "eta").sort((a, b) => a - b);
  const qTop = Math.max(...etaRows.map((r) => num(r, "q")));
  const sxe = linearScale(etas[0]!, etas[etas.length - 1]!, left.x0, left.x1);
  const sye = linearScale(0, qTop * 1.05, left.y1, left.y0);
  for (const row of etaRows) {
    const ki = num(row, "k") - 1;
    const color = COLORS[ki % COLORS.length]!;
    const x = sxe(num(row, "eta"));
    const y = sye(num(row, "q"));
    parts.push(
      str(row, "stability") === "stable"
        ? circle(x, y, 3, color)
        : `<circle cx="${x.toFixed(3)}" cy="${y.toFixed(3)}" r="3" fill="none" stroke="${color}"/>`,
    );
  }
  parts.push(axes({
    ...left,
    xTicks: etas.map((e) => [sxe(e), String(e)]),
    yTicks: linTicks(0, qTop, sye),
    xLabel: "weight exponent",
    yLabel: "invariant-state coordinate",
    title: "invariant states vs exponent",
  }));

  // right panel: drift field with the invariant states marked in red
  const right = panelBox(1);
  const axis1 = [...new Set(field.map((s) => s.q1))].sort((a, b) => a - b);
  const axis2 = [...new Set(field.map((s) => s.q2))].sort((a, b) => a - b);
  const sx = linearScale(axis1[0]!, axis1[axis1.length - 1]!, right.x0, right.x1);
  const sy = linearScale(axis2[0]!, axis2[axis2.length - 1]!, right.y1, right.y0);
  const cellPx = Math.min(
    Math.abs(sx(axis1[1]!) - sx(axis1[0]!)),
    Math.abs(sy(axis2[1]!) - sy(axis2[0]!)),
  );
  const maxMag = Math.max(...field.map((s) => Math.hypot(s.dq1, s.dq2)));
  const scale = (0.9 * cellPx) / (maxMag || 1);
  for (const s of field) {
    const x = sx(s.q1);
    const y = sy(s.q2);
    parts.push(arrow(x, y, x + s.dq1 * scale, y - s.dq2 * scale, "#555"));
  }
  for (const row of states) {
    const q1 = num(row, "q1");
    const q2 = num(row, "q2");
    if (
      q1 < axis1[0]! || q1 > axis1[axis1.length - 1]! ||
      q2 < axis2[0]! || q2 > axis2[axis2.length - 1]!
    ) {
      console.warn(`invariant state (${q1}, ${q2}) lies outside the drift grid`);
    }
    parts.push(circle(sx(q1), sy(q2), 4.5, "#d62728"));
  }
  parts.push(axes({
    ...right,
    xTicks: linTicks(axis1[0]!, axis1[axis1.length - 1]!, sx),
    yTicks: linTicks(axis2[0]!, axis2[axis2.length - 1]!, sy),
    xLabel: "rewards, action 1",
    yLabel: "rewards, action 2",
    title: "fluid drift field",
  }));

  const [w, h] = docSize(2);
  return svgDocument(w, h, parts.join("\n"));
}

/** Steady-state sweep repeated per reward-lifespan law, one panel each. */
export function renderFig8(inDir: string): string {
  const rows = readArtifact(join(inDir, "lifespan.csv"), "lifespan-v1", [
    "beta", "k", "choice_frac", "choice_se", "c_abundant", "c_deficient", "lifespan",
  ]);
  const kinds = distinct<string>(rows, "lifespan");
  const parts: string[] = [];
  kinds.forEach((kind, pi) => {
    parts.push(sweepPanel({
      rows: rows.filter((r) => r.lifespan === kind),
      box: panelBox(pi),
      title: `${kind} lifespans`,
      yLabel: pi === 0 ? "choice fraction" : undefined,
    }));
  });
  const [w, h] = docSize(kinds.length);
  return svgDocument(w, h, parts.join("\n"));
}

export const RENDERERS: Record<FigureId, (inDir: string) => string> = {
  fig2: renderFig2,
  fig3: renderFig3,
  fig4: renderFig4,
  fig6: renderFig6,
  fig8: renderFig8,
};
