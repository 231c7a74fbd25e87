/**
 * Form metadata for the pipeline builder: which functions exist and
 * which kwargs their cards show. Purely a UI affordance -- the backend
 * validates every config itself (and is the source of truth when the
 * two disagree, surfacing errors per line).
 */

export type ParamKind = "number" | "int" | "duration" | "string";

export interface ParamMeta {
  name: string;
  kind: ParamKind;
  required: boolean;
  placeholder?: string;
}

export interface FunctionMeta {
  name: string;
  label: string;
  params: ParamMeta[];
}

export const QC_FUNCTIONS: FunctionMeta[] = [
  {
    name: "flagRange",
    label: "Range check",
    params: [
      { name: "min", kind: "number", required: true },
      { name: "max", kind: "number", required: true },
    ],
  },
  {
    name: "flagSpikeMAD",
    label: "Spike (robust MAD)",
    params: [
      { name: "window", kind: "int", required: true, placeholder: "odd, >= 3" },
      { name: "z", kind: "number", required: false, placeholder: "3.5" },
    ],
  },
  {
    name: "flagConstants",
    label: "Stuck sensor",
    params: [
      { name: "window", kind: "int", required: true, placeholder: ">= 2" },
      { name: "tolerance", kind: "number", required: true },
    ],
  },
  {
    name: "flagGeneric",
    label: "Expression",
    params: [
      { name: "expr", kind: "string", required: true, placeholder: "x > 10" },
    ],
  },
  {
    name: "procResample",
    label: "Resample",
    params: [
      { name: "freq", kind: "duration", required: true, placeholder: "60s" },
      { name: "aggregation", kind: "string", required: false, placeholder: "mean" },
    ],
  },
  {
    name: "procInterpolate",
    label: "Interpolate gaps",
    params: [
      { name: "maxgap", kind: "duration", required: true, placeholder: "120s" },
    ],
  },
];

export function functionMeta(name: string): FunctionMeta | undefined {
  return QC_FUNCTIONS.find((f) => f.name === name);
}

/** Card-level check before any request leaves the builder: required
 * kwargs present and numbers parseable. Returns field -> message. */
export function cardProblems(
  func: string,
  kwargs: Record<string, unknown>,
): Record<string, string> {
  const problems: Record<string, string> = {};
  const meta = functionMeta(func);
  if (!meta) {
    problems["function"] = `unknown function ${func}`;
    return problems;
  }
  for (const param of meta.params) {
    const raw = kwargs[param.name];
    if (raw === undefined || raw === "") {
      if (param.required) problems[param.name] = "required";
      continue;
    }
    if (
      (param.kind === "number" || param.kind === "int") &&
      (typeof raw !== "number" || Number.isNaN(raw))
    ) {
      problems[param.name] = "must be a number";
    }
    if (param.kind === "int" && typeof raw === "number" && !Number.isInteger(raw)) {
      problems[param.name] = "must be an integer";
    }
  }
  for (const key of Object.keys(kwargs)) {
    if (key !== "dfilter" && !meta.params.some((p) => p.name === key)) {
      problems[key] = "unknown parameter";
    }
  }
  return problems;
}
