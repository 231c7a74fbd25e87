/**
 * Live-backend integration: runs only when BACKEND_URL (and
 * BACKEND_ADMIN_TOKEN) point at a running server, e.g.
 *
 *   fairstream --config dev.toml serve &
 *   BACKEND_URL=http://127.0.0.1:8421 BACKEND_ADMIN_TOKEN=... npm test
 *
 * Covers the server half of the builder contract: the dry-run endpoint
 * echoes a canonical config byte-identical to the serialized draft, the
 * saved attachment carries the same hash, and share tokens stay scoped
 * to their own Thing.
 */

import { describe, expect, it } from "vitest";

import { ApiClient, auditClean } from "../src/api.js";
import { serializeDraft, type PipelineDraft } from "../src/dsl.js";
import { buildThingSpec, emptyForm } from "../src/wizard.js";

const BACKEND = process.env.BACKEND_URL;
const TOKEN = process.env.BACKEND_ADMIN_TOKEN;

describe.skipIf(!BACKEND || !TOKEN)("against a live backend", () => {
  it("wizard -> ingest -> preview -> save -> shared dashboard", async () => {
    const api = new ApiClient(BACKEND!);
    api.setToken(TOKEN!);

    const form = emptyForm();
    form.name = `console-it-${Date.now()}`;
    form.rows = [{ column: "temp", position: "air_temperature",
                   name: "air temperature", unit: "Cel", deviceId: "" }];
    const created = await api.createThing(buildThingSpec(form));
    expect(created.credential.secret).toBeTruthy();
    const dsId = created.thing.datastreams[0].id;

    // push a few readings through the documented ingest endpoint
    const csv = "ts,temp\n2024-05-01T00:00:00Z,21.5\n2024-05-01T00:01:00Z,99.0\n";
    const push = await fetch(
      `${BACKEND}/ingest/v1/things/${created.thing.uuid}/observations`, {
        method: "POST",
        headers: { Authorization: `Bearer ${created.credential.secret}` },
        body: csv,
      });
    expect(push.status).toBe(200);

    const draft: PipelineDraft = {
      variable: "air_temperature",
      cards: [
        { func: "flagRange", kwargs: { min: -40, max: 60 } },
        { func: "flagSpikeMAD", kwargs: { window: 5, z: 3.5 } },
      ],
    };
    const sentText = serializeDraft(draft);
    const dryrun = await api.qcDryrun(dsId, sentText);
    // byte-identical canonical config: the client serializer and the
    // server grammar agree exactly
    expect(dryrun.canonical_config).toBe(sentText);

    const attachment = await api.attachQc(created.thing.uuid, sentText, "365d");
    expect(attachment.config_hash).toBe(dryrun.config_hash);

    const dashboard = await api.getDashboard(created.dashboard.share_token);
    expect(dashboard.panels.length).toBe(1);
    const page = await api.fetchDataUrl(dashboard.panels[0].data_url!);
    expect(page.value.length).toBeGreaterThan(0);

    // scoping: a second thing's datastream must 404 under this token
    const other = emptyForm();
    other.name = `console-it-other-${Date.now()}`;
    other.rows = [{ column: "v", position: "v", name: "v", unit: "", deviceId: "" }];
    const second = await api.createThing(buildThingSpec(other));
    const crossUrl = `/v1.1/Datastreams(${second.thing.datastreams[0].id}` +
      `)/Observations?share_token=${dashboard.share_token}`;
    const anonymous = new ApiClient(BACKEND!);
    await expect(anonymous.fetchDataUrl(crossUrl)).rejects.toMatchObject({
      status: 404,
    });

    expect(auditClean(api.audit)).toEqual([]);
  });
});
