/**
 * Pipeline draft <-> QC DSL text.
 *
 * The builder edits drafts (ordered cards of function + kwarg values);
 * saving serializes them to DSL text and hands it to the backend, which
 * owns all semantic validation. The serializer emits the server's
 * canonical form directly (sorted kwargs, canonical literal spellings,
 * one entry per line), so serialize -> parse -> serialize is a fixpoint
 * and the dry-run endpoint's `canonical_config` echoes the exact bytes
 * we sent.
 *
 * The parser here is syntax-only (grammar, not catalog): it exists so
 * the client can re-open a saved config into cards and so the fixpoint
 * property is checkable without a server.
 */

export type Literal = number | string | boolean;

export interface DraftCard {
  func: string;
  kwargs: Record<string, Literal>;
  /** flag threshold masking already-flagged points; omitted = BAD (255) */
  dfilter?: number | FlagName;
}

export interface PipelineDraft {
  variable: string;
  cards: DraftCard[];
}

export interface ParsedEntry {
  line: number;
  variable: string;
  func: string;
  kwargs: Record<string, Literal>;
  dfilter?: number;
}

export type FlagName = "UNFLAGGED" | "GOOD" | "DOUBTFUL" | "BAD";

export const FLAG_VALUES: Record<FlagName, number> = {
  UNFLAGGED: Number.NEGATIVE_INFINITY,
  GOOD: 0.0,
  DOUBTFUL: 25.0,
  BAD: 255.0,
};

const BAD = FLAG_VALUES.BAD;

export class DslSyntaxError extends Error {
  constructor(public line: number, public column: number, expected: string) {
    super(`line ${line}, column ${column}: expected ${expected}`);
  }
}

const VARNAME = /^[A-Za-z_][A-Za-z0-9_.\-]*/;
const IDENT = /^[A-Za-z_][A-Za-z0-9_]*/;
const NUMBER = /^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?/;

/** Python-repr-compatible float spelling (exponents padded to 2 digits). */
export function formatNumber(value: number): string {
  if (Object.is(value, -0)) value = 0;
  if (Number.isInteger(value) && Math.abs(value) < 1e15) {
    return String(value);
  }
  let text = String(value);
  const m = text.match(/^([^eE]+)[eE]([+-])(\d+)$/);
  if (m) {
    const digits = m[3].length < 2 ? "0" + m[3] : m[3];
    text = `${m[1]}e${m[2]}${digits}`;
  }
  return text;
}

function formatLiteral(value: Literal): string {
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "string") return JSON.stringify(value);
  return formatNumber(value);
}

function formatDfilter(value: number): string {
  for (const [name, flag] of Object.entries(FLAG_VALUES)) {
    if (flag === value) return name;
  }
  return formatNumber(value);
}

function dfilterValue(dfilter: number | FlagName | undefined): number {
  if (dfilter === undefined) return BAD;
  if (typeof dfilter === "number") return dfilter;
  return FLAG_VALUES[dfilter];
}

export function serializeCard(variable: string, card: DraftCard): string {
  const parts = Object.keys(card.kwargs)
    .sort()
    .map((key) => `${key}=${formatLiteral(card.kwargs[key])}`);
  const df = dfilterValue(card.dfilter);
  if (df !== BAD) {
    parts.push(`dfilter=${formatDfilter(df)}`);
    parts.sort();
  }
  return `${variable} ; ${card.func}(${parts.join(", ")})`;
}

export function serializeDraft(draft: PipelineDraft): string {
  return draft.cards
    .map((card) => serializeCard(draft.variable, card))
    .join("\n");
}

/** Parse DSL text into entries; comments and blank lines drop out. */
export function parseDsl(text: string): ParsedEntry[] {
  const entries: ParsedEntry[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const raw = lines[i];
    const stripped = raw.trim();
    if (!stripped || stripped.startsWith("#")) continue;
    entries.push(parseLine(raw, i + 1));
  }
  return entries;
}

function parseLine(text: string, line: number): ParsedEntry {
  let pos = 0;

  const fail = (expected: string): never => {
    throw new DslSyntaxError(line, pos + 1, expected);
  };
  const ws = () => {
    while (pos < text.length && (text[pos] === " " || text[pos] === "\t")) pos++;
  };
  const match = (re: RegExp): string | null => {
    ws();
    const m = re.exec(text.slice(pos));
    if (!m) return null;
    pos += m[0].length;
    return m[0];
  };
  const expect = (ch: string) => {
    ws();
    if (text[pos] !== ch) fail(`'${ch}'`);
    pos++;
  };
  const peek = (): string => {
    ws();
    return pos < text.length ? text[pos] : "";
  };

  const readString = (): string => {
    const quote = text[pos];
    pos++;
    let out = "";
    while (pos < text.length) {
      const ch = text[pos];
      if (ch === "\\") {
        if (pos + 1 >= text.length) fail("escape sequence");
        const next = text[pos + 1];
        out += next === "n" ? "\n" : next === "t" ? "\t" : next;
        pos += 2;
        continue;
      }
      if (ch === quote) {
        pos++;
        return out;
      }
      out += ch;
      pos++;
    }
    return fail("closing quote") as never;
  };

  const readLiteral = (): Literal => {
    ws();
    if (pos >= text.length) fail("literal");
    const ch = text[pos];
    if (ch === '"' || ch === "'") return readString();
    const word = IDENT.exec(text.slice(pos));
    if (word) {
      const token = word[0];
      if (token === "true" || token === "false") {
        pos += token.length;
        return token === "true";
      }
      if (token in FLAG_VALUES) {
        pos += token.length;
        return FLAG_VALUES[token as FlagName];
      }
      fail("literal (number, string, true/false or flag name)");
    }
    const num = match(NUMBER);
    if (num !== null) return Number(num);
    return fail("literal (number, string, true/false or flag name)") as never;
  };

  const variable = match(VARNAME);
  if (variable === null) fail("variable name");
  expect(";");
  const func = match(IDENT);
  if (func === null) fail("function name");
  expect("(");
  const kwargs: Record<string, Literal> = {};
  let dfilter: number | undefined;
  if (peek() !== ")") {
    for (;;) {
      const key = match(IDENT);
      if (key === null) fail("parameter name");
      if (key! in kwargs || (key === "dfilter" && dfilter !== undefined)) {
        fail(`duplicate parameter '${key}'`);
      }
      expect("=");
      const value = readLiteral();
      if (key === "dfilter") {
        if (typeof value !== "number") fail("a flag value for dfilter");
        dfilter = value as number;
      } else {
        kwargs[key!] = value;
      }
      if (peek() === ",") {
        expect(",");
        continue;
      }
      break;
    }
  }
  expect(")");
  ws();
  if (pos < text.length) fail("end of line");
  return { line, variable: variable!, func: func!, kwargs, dfilter };
}

/** Rebuild canonical text from parsed entries (comments stripped,
 * whitespace collapsed, kwargs sorted). */
export function canonicalize(text: string): string {
  return parseDsl(text)
    .map((entry) =>
      serializeCard(entry.variable, {
        func: entry.func,
        kwargs: entry.kwargs,
        dfilter: entry.dfilter,
      }),
    )
    .join("\n");
}

/** Re-open saved config text as builder cards; requires a single target
 * variable (the builder edits one datastream's pipeline at a time). */
export function draftFromText(text: string): PipelineDraft {
  const entries = parseDsl(text);
  if (entries.length === 0) return { variable: "", cards: [] };
  const variables = new Set(entries.map((e) => e.variable));
  if (variables.size > 1) {
    throw new DslSyntaxError(
      entries[0].line, 1,
      `a single target variable (found ${[...variables].join(", ")})`,
    );
  }
  return {
    variable: entries[0].variable,
    cards: entries.map((e) => ({
      func: e.func,
      kwargs: e.kwargs,
      ...(e.dfilter !== undefined && e.dfilter !== BAD
        ? { dfilter: e.dfilter }
        : {}),
    })),
  };
}
