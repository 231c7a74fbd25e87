/** Thin-client audit: a recorded console session may only contain the
 * documented backend endpoints. */

import { describe, expect, it } from "vitest";

import { auditClean, DOCUMENTED_ENDPOINTS } from "../src/api.js";
import { loadSharedDashboard } from "../src/dashboard.js";
import { PreviewController } from "../src/preview.js";
import { buildThingSpec, emptyForm } from "../src/wizard.js";
import { clientWith, ManualScheduler } from "./helpers.js";

const THING = {
  uuid: "aaaaaaaa-0000-4000-8000-000000000001",
  name: "t", description: "", transport: "http",
  parser_profile: { kind: "csv", timestamp_column: "ts",
                    timestamp_format: "rfc3339",
                    value_columns: { temp: "temp" }, skip_header_lines: 1 },
  created_at: "2024-05-01T00:00:00Z",
  datastreams: [{ id: 1, position: "temp", name: "temp", unit: "Cel",
                  device_id: null,
                  observed_property: { name: "temp", definition: null } }],
};

const DASHBOARD = {
  thing_uuid: THING.uuid, share_token: "tok", created_at: 0, revoked: false,
  panels: [{ title: "temp", datastream_id: 1, default_range: "now-7d",
             data_url: "/v1.1/Datastreams(1)/Observations?$top=500&share_token=tok" }],
};

function stubbedClient() {
  return clientWith((method, path) => {
    if (method === "POST" && path === "/platform/v1/things") {
      return { status: 201, body: { thing: THING,
        credential: { transport: "http", username: THING.uuid, secret: "s" },
        dashboard: DASHBOARD } };
    }
    if (method === "GET" && path === `/platform/v1/things/${THING.uuid}`) {
      return { status: 200, body: { ...THING, credentials: [] } };
    }
    if (method === "GET" && path === "/platform/v1/things") {
      return { status: 200, body: { things: [THING] } };
    }
    if (path.endsWith("/qc-dryrun")) {
      return { status: 200, body: { report: {}, canonical_config: "",
                                    config_hash: "", columns: [] } };
    }
    if (path.endsWith("/qc-config")) {
      return { status: 201, body: { id: 1, thing_uuid: THING.uuid, config: "",
                                    config_hash: "", schedule: "on_ingest",
                                    lookback_ns: 1, enabled: true } };
    }
    if (path.startsWith("/platform/v1/dashboards/")) {
      return { status: 200, body: DASHBOARD };
    }
    if (path.startsWith("/v1.1/Datastreams(1)/Observations")) {
      return { status: 200, body: { value: [] } };
    }
    if (path.startsWith("/registry/v1/devices?")) {
      return { status: 200, body: { meta: { total: 0 }, data: [] } };
    }
    return undefined;
  });
}

describe("thin-client audit", () => {
  it("a full console session touches only documented endpoints", async () => {
    const api = stubbedClient();
    api.setToken("operator-token");

    // wizard flow
    const form = emptyForm();
    form.name = "crns-logger";
    form.rows = [{ column: "temp", position: "", name: "", unit: "Cel", deviceId: "" }];
    await api.createThing(buildThingSpec(form));
    await api.searchDevices("crns");

    // monitor flow
    await api.getThing(THING.uuid);
    await api.observations(1, "$orderby=phenomenonTime desc&$top=500");

    // builder flow
    const scheduler = new ManualScheduler();
    const preview = new PreviewController(api, 1, () => {}, 0, scheduler);
    preview.update({ variable: "temp",
                     cards: [{ func: "flagRange", kwargs: { min: 0, max: 45 } }] });
    scheduler.flush();
    await new Promise((r) => setTimeout(r, 0));
    await preview.save(THING.uuid, {
      variable: "temp",
      cards: [{ func: "flagRange", kwargs: { min: 0, max: 45 } }],
    });

    // shared dashboard flow
    const shared = await loadSharedDashboard(api, "tok", () => {});
    await shared.panels[0].poller.tick();

    expect(api.audit.length).toBeGreaterThanOrEqual(8);
    expect(auditClean(api.audit)).toEqual([]);
  });

  it("flags anything off the documented surface", () => {
    expect(auditClean([
      { method: "GET", path: "/internal/debug", status: 200 },
    ])).toEqual(["GET /internal/debug"]);
    expect(auditClean([
      { method: "DELETE", path: "/platform/v1/things/x", status: 200 },
    ])).toHaveLength(1);
  });

  it("documented endpoint list covers every console surface", () => {
    const must = [
      "POST /platform/v1/things",
      "POST /platform/v1/datastreams/3/qc-dryrun",
      "POST /platform/v1/things/aaaaaaaa-0000-4000-8000-000000000001/qc-config",
      "GET /platform/v1/dashboards/sometoken",
      "GET /v1.1/Datastreams(1)/Observations?$top=5",
      "GET /registry/v1/devices?q=crns",
    ];
    for (const line of must) {
      expect(DOCUMENTED_ENDPOINTS.some((re) => re.test(line)),
             `${line} should be documented`).toBe(true);
    }
  });
});
