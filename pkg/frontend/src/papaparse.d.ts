/**
 * Minimal typings for the slice of papaparse this package uses (the global
 * mirror ships the package without @types/papaparse).
 */
declare module "papaparse" {
  export interface ParseError {
    type: string;
    code: string;
    message: string;
    row?: number;
  }

  export interface ParseMeta {
    delimiter: string;
    linebreak: string;
    aborted: boolean;
    truncated: boolean;
    fields?: string[];
  }

  export interface ParseResult<T> {
    data: T[];
    errors: ParseError[];
    meta: ParseMeta;
  }

  export interface ParseConfig {
    header?: boolean;
    dynamicTyping?: boolean;
    skipEmptyLines?: boolean | "greedy";
    comments?: boolean | string;
    delimiter?: string;
  }

  export function parse<T>(input: string, config?: ParseConfig): ParseResult<T>;

  const Papa: { parse: typeof parse };
  export default Papa;
}
