/**
 * Typed client over the documented backend endpoints.
 *
 * Every request goes through one recorder so a session can be audited:
 * the console must never talk to anything outside DOCUMENTED_ENDPOINTS
 * (thin-client rule -- no private channels, no undocumented surface).
 * The session token lives in memory only.
 */

import type {
  ApiError,
  CreatedThing,
  DashboardDescriptor,
  DryRunResponse,
  ObservationPage,
  QcAttachmentDoc,
  ThingDoc,
  ThingSpec,
} from "./types.js";

export const DOCUMENTED_ENDPOINTS: RegExp[] = [
  /^GET \/registry\/v1\/devices(\?.*)?$/,
  /^GET \/registry\/v1\/devices\/\d+$/,
  /^GET \/registry\/v1\/devices\/\d+\/sensorml$/,
  /^POST \/registry\/v1\/devices$/,
  /^POST \/registry\/v1\/devices\/\d+\/mounts$/,
  /^GET \/pid\/[^/]+\/[^/]+$/,
  /^POST \/platform\/v1\/things$/,
  /^GET \/platform\/v1\/things$/,
  /^GET \/platform\/v1\/things\/[0-9a-f-]+$/,
  /^POST \/platform\/v1\/things\/[0-9a-f-]+\/qc-config$/,
  /^POST \/platform\/v1\/datastreams\/\d+\/qc-config$/,
  /^POST \/platform\/v1\/datastreams\/\d+\/qc-dryrun$/,
  /^GET \/platform\/v1\/dashboards\/[^/]+$/,
  /^GET \/v1\.1(\/)?(\?.*)?$/,
  /^GET \/v1\.1\/[A-Za-z]+(\(\d+\))?(\?.*)?$/,
  /^GET \/v1\.1\/[A-Za-z]+\(\d+\)\/[A-Za-z]+(\?.*)?$/,
];

export interface RecordedCall {
  method: string;
  path: string;
  status: number;
}

export class RequestError extends Error {
  constructor(public status: number, message: string,
              public body: ApiError | null = null) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly audit: RecordedCall[] = [];
  private token: string | null = null;

  constructor(
    readonly baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  /** The single chokepoint: records, authorizes, unwraps errors. */
  async request<T>(method: string, path: string, body?: unknown,
                   rawBody?: string): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let payload: string | undefined;
    if (rawBody !== undefined) {
      payload = rawBody;
    } else if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: payload,
    });
    this.audit.push({ method, path, status: response.status });
    if (!response.ok) {
      let parsed: ApiError | null = null;
      try {
        parsed = (await response.json()) as ApiError;
      } catch {
        parsed = null;
      }
      const message = parsed?.error?.message ?? `HTTP ${response.status}`;
      throw new RequestError(response.status, message, parsed);
    }
    return (await response.json()) as T;
  }

  // -- platform ------------------------------------------------------------

  createThing(spec: ThingSpec): Promise<CreatedThing> {
    return this.request("POST", "/platform/v1/things", spec);
  }

  getThing(uuid: string): Promise<ThingDoc & { credentials: unknown[] }> {
    return this.request("GET", `/platform/v1/things/${uuid}`);
  }

  listThings(): Promise<{ things: ThingDoc[] }> {
    return this.request("GET", "/platform/v1/things");
  }

  attachQc(thingUuid: string, configText: string, lookback = "30d",
           schedule = "on_ingest"): Promise<QcAttachmentDoc> {
    return this.request("POST", `/platform/v1/things/${thingUuid}/qc-config`, {
      config: configText,
      lookback,
      schedule,
    });
  }

  qcDryrun(datastreamId: number, configText: string): Promise<DryRunResponse> {
    return this.request(
      "POST", `/platform/v1/datastreams/${datastreamId}/qc-dryrun`,
      { config: configText });
  }

  getDashboard(shareToken: string): Promise<DashboardDescriptor> {
    return this.request("GET", `/platform/v1/dashboards/${shareToken}`);
  }

  // -- SensorThings reads -----------------------------------------------------

  observations(datastreamId: number, options = "", shareToken?: string):
      Promise<ObservationPage> {
    let query = options;
    if (shareToken) {
      query += (query ? "&" : "") + `share_token=${shareToken}`;
    }
    const suffix = query ? `?${query}` : "";
    return this.request(
      "GET", `/v1.1/Datastreams(${datastreamId})/Observations${suffix}`);
  }

  /** Follow a descriptor-provided data URL (already token-scoped). */
  fetchDataUrl(dataUrl: string): Promise<ObservationPage> {
    return this.request("GET", dataUrl);
  }

  // -- registry reads (wizard device picker) ------------------------------------

  searchDevices(query: string): Promise<{ meta: { total: number }; data: unknown[] }> {
    return this.request("GET", `/registry/v1/devices?q=${encodeURIComponent(query)}`);
  }
}

/** True when every recorded call matches a documented endpoint. */
export function auditClean(calls: RecordedCall[]): string[] {
  const offenders: string[] = [];
  for (const call of calls) {
    const line = `${call.method} ${call.path}`;
    if (!DOCUMENTED_ENDPOINTS.some((re) => re.test(line))) {
      offenders.push(line);
    }
  }
  return offenders;
}
