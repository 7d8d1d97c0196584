/**
 * Figure rendering CLI: `render --fig fig3 --in DIR --out DIR`.
 *
 * Reads the simulator's versioned CSV artifacts from the input directory and
 * writes `<fig>.svg` to the output directory. Exit codes: 0 success, 2 bad
 * arguments or unreadable input.
 */
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";
import { fileURLToPath } from "node:url";
import { CsvError } from "./csv.js";
import { RENDERERS, type FigureId } from "./figures.js";

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs({
      args: argv,
      options: {
        fig: { type: "string" },
        in: { type: "string" },
        out: { type: "string", default: "out" },
      },
      allowPositionals: true,
    });
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  const positionals = args.positionals;
  if (positionals.length !== 1 || positionals[0] !== "render") {
    console.error("usage: render --fig figN --in DIR --out DIR");
    return 2;
  }
  const fig = args.values.fig;
  const inDir = args.values.in;
  const outDir = args.values.out!;
  if (!fig || !(fig in RENDERERS)) {
    console.error(`--fig must be one of ${Object.keys(RENDERERS).join(", ")}`);
    return 2;
  }
  if (!inDir) {
    console.error("--in DIR is required");
    return 2;
  }
  let svg: string;
  try {
    svg = RENDERERS[fig as FigureId](inDir);
  } catch (err) {
    if (err instanceof CsvError) {
      console.error(`input error: ${err.message}`);
      return 2;
    }
    throw err;
  }
  mkdirSync(outDir, { recursive: true });
  const path = join(outDir, `${fig}.svg`);
  writeFileSync(path, svg);
  console.log(`wrote ${path}`);
  return 0;
}

if (process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1]) {
  process.exit(main(process.argv.slice(2)));
}
