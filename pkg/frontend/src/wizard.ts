/**
 * Thing-setup wizard: collect name/transport/profile/datastreams, show
 * field-level problems inline, build the exact create-thing payload.
 * All semantic rules live server-side; these checks only catch what
 * would obviously bounce (empty fields, duplicate positions) before a
 * request is made.
 */

import type { DatastreamDecl, ParserProfileSpec, ThingSpec } from "./types.js";

export interface WizardForm {
  name: string;
  description: string;
  transport: "http" | "mqtt" | "dropdir";
  timestampColumn: string;
  timestampFormat: "rfc3339" | "epoch-seconds" | "epoch-millis";
  skipHeaderLines: number;
  rows: WizardRow[];
}

export interface WizardRow {
  column: string;    // column name/key in the logger payload
  position: string;  // datastream position (defaults to column)
  name: string;
  unit: string;
  deviceId: string;  // raw field value; "" = unlinked
}

export function emptyForm(): WizardForm {
  return {
    name: "",
    description: "",
    transport: "http",
    timestampColumn: "ts",
    timestampFormat: "rfc3339",
    skipHeaderLines: 1,
    rows: [{ column: "", position: "", name: "", unit: "", deviceId: "" }],
  };
}

/** field path -> message; empty object means the form can be submitted. */
export function formProblems(form: WizardForm): Record<string, string> {
  const problems: Record<string, string> = {};
  if (!form.name.trim()) problems["name"] = "thing name is required";
  if (!form.timestampColumn.trim()) {
    problems["timestampColumn"] = "timestamp column is required";
  }
  if (form.rows.length === 0) {
    problems["rows"] = "at least one datastream is required";
  }
  const seen = new Set<string>();
  form.rows.forEach((row, index) => {
    const position = effectivePosition(row);
    if (!row.column.trim()) {
      problems[`rows.${index}.column`] = "column is required";
      return;
    }
    if (row.column.trim() === form.timestampColumn.trim()) {
      problems[`rows.${index}.column`] = "column already carries the timestamp";
    }
    if (seen.has(position)) {
      problems[`rows.${index}.position`] = `duplicate position '${position}'`;
    }
    seen.add(position);
    if (row.deviceId && !/^\d+$/.test(row.deviceId.trim())) {
      problems[`rows.${index}.deviceId`] = "device id must be a number";
    }
  });
  return problems;
}

function effectivePosition(row: WizardRow): string {
  return (row.position.trim() || row.column.trim());
}

export function buildThingSpec(form: WizardForm): ThingSpec {
  const valueColumns: Record<string, string> = {};
  const datastreams: DatastreamDecl[] = [];
  for (const row of form.rows) {
    const position = effectivePosition(row);
    valueColumns[row.column.trim()] = position;
    datastreams.push({
      position,
      name: row.name.trim() || position,
      unit: row.unit.trim(),
      device_id: row.deviceId ? Number(row.deviceId) : null,
      observed_property: { name: row.name.trim() || position },
    });
  }
  const profile: ParserProfileSpec = {
    kind: "csv",
    timestamp_column: form.timestampColumn.trim(),
    timestamp_format: form.timestampFormat,
    value_columns: valueColumns,
    skip_header_lines: form.skipHeaderLines,
  };
  return {
    name: form.name.trim(),
    description: form.description.trim(),
    transport: form.transport,
    parser_profile: profile,
    datastreams,
  };
}
