/**
 * Read-only access to the simulator's versioned CSV artifacts.
 *
 * Every artifact starts with a `# schema=<tag>` comment line followed by a
 * header row. Readers verify the tag and the required columns up front so a
 * renderer never works from a file it does not understand.
 */
import { readFileSync } from "node:fs";
import Papa from "papaparse";

export type Row = Record<string, string | number>;

export class CsvError extends Error {}

/** Parse one artifact, enforcing its schema tag and required columns. */
export function readArtifact(
  path: string,
  expectedSchema: string,
  requiredColumns: string[],
): Row[] {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new CsvError(`cannot read ${path}: ${(err as Error).message}`);
  }
  const newline = text.indexOf("\n");
  const firstLine = (newline < 0 ? text : text.slice(0, newline)).trim();
  const match = /^#\s*schema=(\S+)$/.exec(firstLine);
  if (!match) {
    throw new CsvError(`${path}: missing "# schema=<tag>" header line`);
  }
  if (match[1] !== expectedSchema) {
    throw new CsvError(
      `${path}: schema mismatch: expected ${expectedSchema}, found ${match[1]}`,
    );
  }
  const body = newline < 0 ? "" : text.slice(newline + 1);
  const parsed = Papa.parse<Row>(body, {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    throw new CsvError(`${path}: malformed CSV: ${first.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of requiredColumns) {
    if (!fields.includes(col)) {
      throw new CsvError(`${path}: missing required column ${col}`);
    }
  }
  if (parsed.data.length === 0) {
    throw new CsvError(`${path}: no data rows`);
  }
  return parsed.data;
}

export function num(row: Row, col: string): number {
  const v = row[col];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new CsvError(`non-numeric value ${String(v)} in column ${col}`);
  }
  return v;
}

export function str(row: Row, col: string): string {
  const v = row[col];
  if (typeof v !== "string") {
    throw new CsvError(`non-string value ${String(v)} in column ${col}`);
  }
  return v;
}

/** Distinct values of a column, in first-appearance order. */
export function distinct<T extends string | number>(
  rows: Row[],
  col: string,
): T[] {
  const seen: T[] = [];
  for (const row of rows) {
    const v = row[col] as T;
    if (!seen.includes(v)) seen.push(v);
  }
  return seen;
}
