import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { CsvError } from "../src/csv.js";
import {
  interpolateDrift, loadDriftField, loadInvariantStates, RENDERERS,
} from "../src/figures.js";

const DATA = join(dirname(fileURLToPath(import.meta.url)), "..", "data");

describe("acceptance: every figure renders from the checked-in artifacts", () => {
  for (const fig of ["fig2", "fig3", "fig4", "fig6", "fig8"] as const) {
    it(`${fig} renders`, () => {
      const svg = RENDERERS[fig](join(DATA, fig));
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
      expect(svg.length).toBeGreaterThan(2000);
    });
  }

  it("fig6 drift arrows vanish at the three marked states", () => {
    const field = loadDriftField(join(DATA, "fig6"));
    const states = loadInvariantStates(join(DATA, "fig6"));
    expect(states).toHaveLength(3);
    const magnitudes = field
      .map((s) => Math.hypot(s.dq1, s.dq2))
      .sort((a, b) => a - b);
    const typical = magnitudes[Math.floor(magnitudes.length * 0.9)]!;
    const axis = [...new Set(field.map((s) => s.q1))].sort((a, b) => a - b);
    const spacing = axis[1]! - axis[0]!;
    for (const row of states) {
      const [d1, d2] = interpolateDrift(field, row.q1 as number, row.q2 as number);
      const mag = Math.hypot(d1, d2);
      // grid-scaled epsilon: far below both the cell size and a typical arrow
      expect(mag).toBeLessThan(spacing);
      expect(mag).toBeLessThan(0.15 * typical);
    }
  });

  it("fig6 states carry the expected stability labels", () => {
    const states = loadInvariantStates(join(DATA, "fig6"));
    const labels = states.map((r) => r.stability);
    expect(labels.filter((l) => l === "stable")).toHaveLength(2);
    expect(labels.filter((l) => l === "unstable")).toHaveLength(1);
  });
});

describe("figure content", () => {
  it("fig2 draws one bar per action and regime", () => {
    const svg = RENDERERS.fig2(join(DATA, "fig2"));
    const bars = svg.match(/<rect(?![^>]*fill="white")/g) ?? [];
    expect(bars).toHaveLength(2 * 4);
    expect(svg).toContain("abundant");
    expect(svg).toContain("deficient");
  });

  it("fig3 draws curves with dashed theory overlays", () => {
    const svg = RENDERERS.fig3(join(DATA, "fig3"));
    expect((svg.match(/<polyline/g) ?? []).length).toBe(4);
    expect(svg).toContain("stroke-dasharray");
  });

  it("fig4 pairs solid stochastic and dashed fluid lines per panel", () => {
    const svg = RENDERERS.fig4(join(DATA, "fig4"));
    expect(svg).toContain("m = 150");
    expect(svg).toContain("m = 800");
    // three panels x three actions x (solid + dashed)
    expect((svg.match(/<polyline/g) ?? []).length).toBe(3 * 3 * 2);
    expect((svg.match(/stroke-dasharray/g) ?? []).length).toBeGreaterThanOrEqual(9);
  });

  it("fig6 marks the invariant states in red", () => {
    const svg = RENDERERS.fig6(join(DATA, "fig6"));
    expect((svg.match(/fill="#d62728"\/>/g) ?? []).length).toBeGreaterThanOrEqual(3);
    expect((svg.match(/<polygon/g) ?? []).length).toBeGreaterThan(100); // arrowheads
  });

  it("fig8 renders one panel per lifespan law", () => {
    const svg = RENDERERS.fig8(join(DATA, "fig8"));
    for (const kind of ["exponential", "constant", "pareto"]) {
      expect(svg).toContain(`${kind} lifespans`);
    }
  });
});

describe("degenerate inputs", () => {
  function emptyArtifactDir(name: string, header: string, schema: string): string {
    const dir = mkdtempSync(join(tmpdir(), "figdata-"));
    writeFileSync(join(dir, name), `# schema=${schema}\n${header}\n`);
    return dir;
  }

  it("empty CSV is an explicit error, not an empty plot", () => {
    const dir = emptyArtifactDir(
      "theory.csv", "k,lambda_k,c_abundant,c_deficient,q_abundant,q_deficient",
      "theory-v1",
    );
    expect(() => RENDERERS.fig2(dir)).toThrow(/no data rows/);
  });

  it("schema mismatch is rejected before rendering", () => {
    const dir = mkdtempSync(join(tmpdir(), "figdata-"));
    writeFileSync(join(dir, "theory.csv"), "# schema=sweep-v1\nk,c_abundant\n1,0.5\n");
    expect(() => RENDERERS.fig2(dir)).toThrow(CsvError);
  });

  it("missing artifact file is rejected", () => {
    const dir = mkdtempSync(join(tmpdir(), "figdata-"));
    expect(() => RENDERERS.fig3(dir)).toThrow(CsvError);
  });
});
