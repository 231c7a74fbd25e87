import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { serializeDraft, type PipelineDraft } from "../src/dsl.js";
import { PreviewController } from "../src/preview.js";
import { ManualScheduler, clientWith } from "./helpers.js";

const DRAFT: PipelineDraft = {
  variable: "temp",
  cards: [{ func: "flagRange", kwargs: { min: 0, max: 45 } }],
};

function dryrunResponse(flagTime = "2024-05-01T00:02:00Z") {
  return {
    status: 200,
    body: {
      report: {},
      canonical_config: serializeDraft(DRAFT),
      config_hash: "abc",
      columns: [{
        variable: "temp", function: "flagRange",
        entries: [{ phenomenonTime: flagTime, flag: "BAD" }],
      }],
    },
  };
}

describe("PreviewController", () => {
  it("debounces edits into a single dry-run request", async () => {
    let calls = 0;
    const api = clientWith((method, path) => {
      if (path.endsWith("/qc-dryrun")) {
        calls++;
        return dryrunResponse();
      }
      return undefined;
    });
    const scheduler = new ManualScheduler();
    const preview = new PreviewController(api, 1, () => {}, 300, scheduler);
    preview.update(DRAFT);
    preview.update(DRAFT);
    preview.update(DRAFT);
    expect(scheduler.pending).toHaveLength(1); // older timers cancelled
    scheduler.flush();
    await Promise.resolve();
    await new Promise((r) => setTimeout(r, 0));
    expect(calls).toBe(1);
    expect(preview.state.status).toBe("ready");
    expect(preview.state.overlay.get("2024-05-01T00:02:00Z")).toBe("BAD");
  });

  it("drops stale responses (cancel-on-newer)", async () => {
    const gates: Array<(r: Response) => void> = [];
    const api = new ApiClient("", (url, init) =>
      new Promise<Response>((resolve) => gates.push(resolve)));
    const scheduler = new ManualScheduler();
    const preview = new PreviewController(api, 1, () => {}, 0, scheduler);

    preview.update(DRAFT);
    scheduler.flush();
    const second: PipelineDraft = {
      variable: "temp",
      cards: [{ func: "flagRange", kwargs: { min: 0, max: 99 } }],
    };
    preview.update(second);
    scheduler.flush();
    expect(gates).toHaveLength(2);

    const reply = (body: unknown) =>
      new Response(JSON.stringify(body), {
        status: 200, headers: { "content-type": "application/json" } });
    // the newer request answers first...
    gates[1](reply({ report: {}, canonical_config: "", config_hash: "",
                     columns: [{ variable: "temp", function: "flagRange",
                                 entries: [{ phenomenonTime: "T2", flag: "BAD" }] }] }));
    await new Promise((r) => setTimeout(r, 0));
    expect(preview.state.overlay.get("T2")).toBe("BAD");
    // ...and the stale first response must not overwrite it
    gates[0](reply({ report: {}, canonical_config: "", config_hash: "",
                     columns: [{ variable: "temp", function: "flagRange",
                                 entries: [{ phenomenonTime: "T1", flag: "BAD" }] }] }));
    await new Promise((r) => setTimeout(r, 0));
    expect(preview.state.overlay.has("T1")).toBe(false);
    expect(preview.state.overlay.get("T2")).toBe("BAD");
  });

  it("card-level problems block the request entirely", () => {
    let calls = 0;
    const api = clientWith(() => {
      calls++;
      return dryrunResponse();
    });
    const scheduler = new ManualScheduler();
    const preview = new PreviewController(api, 1, () => {}, 0, scheduler);
    preview.update({
      variable: "temp",
      cards: [{ func: "flagRange", kwargs: { min: 0 } }], // max missing
    });
    scheduler.flush();
    expect(calls).toBe(0);
    expect(preview.state.status).toBe("card-error");
    expect(preview.state.cardErrors[0]).toHaveProperty("max");
  });

  it("save posts the exact serialized draft bytes", async () => {
    let sentConfig: string | undefined;
    const api = clientWith((method, path, body) => {
      if (path.endsWith("/qc-config")) {
        sentConfig = JSON.parse(body!).config;
        return {
          status: 201,
          body: { id: 1, thing_uuid: "u", config: sentConfig,
                  config_hash: "h", schedule: "on_ingest",
                  lookback_ns: 1, enabled: true },
        };
      }
      return undefined;
    });
    const preview = new PreviewController(api, 1);
    const { sentText } = await preview.save("u", DRAFT);
    expect(sentText).toBe(serializeDraft(DRAFT));
    expect(sentConfig).toBe(sentText);
  });
});
