/** Shared shapes exchanged with the backend. */

export interface MeasuredQuantityDecl {
  name: string;
  unit: string;
  position_index: number;
}

export interface ParserProfileSpec {
  kind: "csv" | "json-lines";
  timestamp_column: string;
  timestamp_format: "rfc3339" | "epoch-seconds" | "epoch-millis";
  value_columns: Record<string, string>;
  delimiter?: string;
  skip_header_lines?: number;
}

export interface DatastreamDecl {
  position: string;
  name?: string;
  unit?: string;
  device_id?: number | null;
  observed_property?: { name?: string; definition?: string };
}

export interface ThingSpec {
  name: string;
  description?: string;
  transport: "http" | "mqtt" | "dropdir";
  parser_profile: ParserProfileSpec;
  datastreams: DatastreamDecl[];
}

export interface DatastreamInfo {
  id: number;
  position: string;
  name: string;
  unit: string;
  device_id: number | null;
  observed_property: { name: string; definition: string | null };
}

export interface ThingDoc {
  uuid: string;
  name: string;
  description: string;
  transport: string;
  parser_profile: ParserProfileSpec;
  created_at: string;
  datastreams: DatastreamInfo[];
}

export interface Credential {
  transport: string;
  username: string;
  secret: string; // shown exactly once, never persisted client-side
}

export interface CreatedThing {
  thing: ThingDoc;
  credential: Credential;
  dashboard: DashboardDescriptor;
}

export interface DashboardPanel {
  title: string;
  datastream_id: number;
  default_range: string;
  data_url?: string;
}

export interface DashboardDescriptor {
  thing_uuid: string;
  share_token: string;
  created_at: number;
  revoked: boolean;
  panels: DashboardPanel[];
}

export interface Observation {
  "@iot.id": number;
  phenomenonTime: string;
  result: number;
  resultTime: string | null;
  parameters: { flag: string | number; flag_scheme: string };
}

export interface ObservationPage {
  value: Observation[];
  "@iot.nextLink"?: string;
}

export interface DryRunEntry {
  phenomenonTime: string;
  flag: string;
}

export interface DryRunColumn {
  variable: string;
  function: string;
  entries: DryRunEntry[];
}

export interface DryRunResponse {
  report: unknown;
  canonical_config: string;
  config_hash: string;
  columns: DryRunColumn[];
}

export interface QcAttachmentDoc {
  id: number;
  thing_uuid: string;
  config: string;
  config_hash: string;
  schedule: string;
  lookback_ns: number;
  enabled: boolean;
}

export interface ApiError {
  error: { code: number; message: string; [key: string]: unknown };
}
