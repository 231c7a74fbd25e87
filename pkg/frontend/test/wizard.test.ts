import { describe, expect, it } from "vitest";

import { buildThingSpec, emptyForm, formProblems } from "../src/wizard.js";

function crnsForm() {
  const form = emptyForm();
  form.name = "crns-logger";
  form.rows = [
    { column: "temp", position: "air_temperature", name: "air temperature",
      unit: "Cel", deviceId: "1" },
    { column: "press", position: "air_pressure", name: "air pressure",
      unit: "hPa", deviceId: "1" },
    { column: "counts", position: "neutron_counts", name: "neutron counts",
      unit: "1/h", deviceId: "1" },
  ];
  return form;
}

describe("formProblems", () => {
  it("accepts the reference three-stream form", () => {
    expect(formProblems(crnsForm())).toEqual({});
  });

  it("requires name and at least one row", () => {
    const form = emptyForm();
    form.rows = [];
    const problems = formProblems(form);
    expect(problems).toHaveProperty("name");
    expect(problems).toHaveProperty("rows");
  });

  it("flags duplicate positions inline", () => {
    const form = crnsForm();
    form.rows[1].position = "air_temperature";
    const problems = formProblems(form);
    expect(problems["rows.1.position"]).toMatch(/duplicate/);
  });

  it("rejects a value column that shadows the timestamp column", () => {
    const form = crnsForm();
    form.rows[0].column = "ts";
    expect(formProblems(form)["rows.0.column"]).toMatch(/timestamp/);
  });

  it("device ids must be numeric", () => {
    const form = crnsForm();
    form.rows[0].deviceId = "abc";
    expect(formProblems(form)["rows.0.deviceId"]).toMatch(/number/);
  });
});

describe("buildThingSpec", () => {
  it("assembles the create-thing payload", () => {
    const spec = buildThingSpec(crnsForm());
    expect(spec.parser_profile.value_columns).toEqual({
      temp: "air_temperature", press: "air_pressure", counts: "neutron_counts",
    });
    expect(spec.datastreams).toHaveLength(3);
    expect(spec.datastreams[0]).toMatchObject({
      position: "air_temperature", unit: "Cel", device_id: 1,
    });
  });

  it("position defaults to the column name", () => {
    const form = emptyForm();
    form.name = "x";
    form.rows = [{ column: "v", position: "", name: "", unit: "", deviceId: "" }];
    const spec = buildThingSpec(form);
    expect(spec.datastreams[0].position).toBe("v");
    expect(spec.parser_profile.value_columns).toEqual({ v: "v" });
  });
});
