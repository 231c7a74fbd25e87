/**
 * Single-page shell: hash routes, template-string rendering, event
 * wiring. Business outcomes all come from the backend; this file only
 * moves form values in and documents out.
 *
 *   #/login              paste an operator token (kept in memory only)
 *   #/wizard             create a Thing, show the one-time credential
 *   #/things/<uuid>      live monitor (one chart per datastream)
 *   #/builder/<dsId>     QC pipeline builder with dry-run preview
 *   #/share/<token>      read-only shared dashboard
 */

import { ApiClient, RequestError } from "./api.js";
import { draw } from "./charts.js";
import { QC_FUNCTIONS } from "./catalog.js";
import { loadSharedDashboard } from "./dashboard.js";
import { serializeDraft, type DraftCard, type PipelineDraft } from "./dsl.js";
import { PanelPoller, defaultChartState } from "./monitor.js";
import { PreviewController } from "./preview.js";
import { buildThingSpec, emptyForm, formProblems, type WizardForm } from "./wizard.js";

const api = new ApiClient("");
let wizardForm: WizardForm = emptyForm();
let activePollers: PanelPoller[] = [];

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;" }[ch]!));
}

function stopPollers(): void {
  activePollers.forEach((p) => p.stop());
  activePollers = [];
}

function route(): void {
  stopPollers();
  const hash = window.location.hash || "#/login";
  const [, page, arg] = hash.split("/");
  const root = el("app");
  if (page === "wizard") return renderWizard(root);
  if (page === "things" && arg) return void renderMonitor(root, arg);
  if (page === "builder" && arg) return void renderBuilder(root, Number(arg));
  if (page === "share" && arg) return void renderShared(root, arg);
  renderLogin(root);
}

// -- login ---------------------------------------------------------------

function renderLogin(root: HTMLElement): void {
  root.innerHTML = `
    <h1>fairstream console</h1>
    <div class="card">
      <label>Operator token
        <input id="token" type="password" autocomplete="off">
      </label>
      <button id="enter">Enter</button>
      <p class="hint">The token stays in memory; reloading forgets it.</p>
    </div>`;
  el("enter").addEventListener("click", () => {
    const token = (el("token") as HTMLInputElement).value.trim();
    api.setToken(token || null);
    window.location.hash = "#/wizard";
  });
}

// -- wizard ----------------------------------------------------------------

function renderWizard(root: HTMLElement): void {
  const problems = formProblems(wizardForm);
  const rows = wizardForm.rows
    .map((row, i) => `
      <tr>
        <td><input data-row="${i}" data-field="column" value="${escapeHtml(row.column)}"></td>
        <td><input data-row="${i}" data-field="position" value="${escapeHtml(row.position)}" placeholder="(column)"></td>
        <td><input data-row="${i}" data-field="name" value="${escapeHtml(row.name)}"></td>
        <td><input data-row="${i}" data-field="unit" value="${escapeHtml(row.unit)}"></td>
        <td><input data-row="${i}" data-field="deviceId" value="${escapeHtml(row.deviceId)}" placeholder="registry id"></td>
        <td class="error">${escapeHtml(rowProblem(problems, i))}</td>
      </tr>`)
    .join("");
  root.innerHTML = `
    <h1>New Thing</h1>
    <div class="card">
      <label>Name <input id="w-name" value="${escapeHtml(wizardForm.name)}"></label>
      <span class="error">${escapeHtml(problems["name"] ?? "")}</span>
      <label>Description <input id="w-desc" value="${escapeHtml(wizardForm.description)}"></label>
      <label>Transport
        <select id="w-transport">
          ${["http", "mqtt", "dropdir"].map((t) =>
            `<option ${t === wizardForm.transport ? "selected" : ""}>${t}</option>`).join("")}
        </select>
      </label>
      <label>Timestamp column <input id="w-tscol" value="${escapeHtml(wizardForm.timestampColumn)}"></label>
      <label>Timestamp format
        <select id="w-tsfmt">
          ${["rfc3339", "epoch-seconds", "epoch-millis"].map((f) =>
            `<option ${f === wizardForm.timestampFormat ? "selected" : ""}>${f}</option>`).join("")}
        </select>
      </label>
      <h2>Datastreams</h2>
      <table>
        <tr><th>column</th><th>position</th><th>name</th><th>unit</th><th>device</th><th></th></tr>
        ${rows}
      </table>
      <button id="w-addrow">Add datastream</button>
      <button id="w-create" ${Object.keys(problems).length ? "disabled" : ""}>Create Thing</button>
      <div id="w-result"></div>
    </div>`;

  const rebind = (id: string, apply: (value: string) => void) => {
    el(id).addEventListener("change", (event) => {
      apply((event.target as HTMLInputElement).value);
      renderWizard(root);
    });
  };
  rebind("w-name", (v) => (wizardForm.name = v));
  rebind("w-desc", (v) => (wizardForm.description = v));
  rebind("w-transport", (v) => (wizardForm.transport = v as WizardForm["transport"]));
  rebind("w-tscol", (v) => (wizardForm.timestampColumn = v));
  rebind("w-tsfmt", (v) => (wizardForm.timestampFormat = v as WizardForm["timestampFormat"]));
  root.querySelectorAll("input[data-row]").forEach((input) => {
    input.addEventListener("change", (event) => {
      const target = event.target as HTMLInputElement;
      const row = wizardForm.rows[Number(target.dataset.row)];
      (row as unknown as Record<string, string>)[target.dataset.field!] = target.value;
      renderWizard(root);
    });
  });
  el("w-addrow").addEventListener("click", () => {
    wizardForm.rows.push({ column: "", position: "", name: "", unit: "", deviceId: "" });
    renderWizard(root);
  });
  el("w-create").addEventListener("click", () => void createThing(root));
}

function rowProblem(problems: Record<string, string>, index: number): string {
  for (const [key, message] of Object.entries(problems)) {
    if (key.startsWith(`rows.${index}.`)) return message;
  }
  return "";
}

async function createThing(root: HTMLElement): Promise<void> {
  const result = el("w-result");
  try {
    const created = await api.createThing(buildThingSpec(wizardForm));
    wizardForm = emptyForm();
    // one-time credential: rendered once, never stored
    result.innerHTML = `
      <div class="card credential">
        <h2>Credential (shown once)</h2>
        <p>Copy it now; the server keeps only a hash and this page never
           shows it again.</p>
        <code>${escapeHtml(created.credential.username)} :
              ${escapeHtml(created.credential.secret)}</code>
        <p><a href="#/things/${created.thing.uuid}">Open the monitor</a> |
           share token <code>${escapeHtml(created.dashboard.share_token)}</code></p>
      </div>`;
  } catch (error) {
    result.innerHTML = `<p class="error">${escapeHtml(
      error instanceof RequestError ? error.message : String(error))}</p>`;
  }
}

// -- monitor -----------------------------------------------------------------

async function renderMonitor(root: HTMLElement, uuid: string): Promise<void> {
  const thing = await api.getThing(uuid);
  root.innerHTML = `
    <h1>${escapeHtml(thing.name)}</h1>
    <p>${escapeHtml(thing.description)} (${escapeHtml(thing.transport)})</p>
    ${thing.datastreams.map((ds) => `
      <div class="card">
        <h2>${escapeHtml(ds.name)} <small>${escapeHtml(ds.unit)}</small>
          <a class="builder-link" href="#/builder/${ds.id}">QC builder</a></h2>
        <canvas id="chart-${ds.id}" width="860" height="220"></canvas>
      </div>`).join("")}`;
  for (const ds of thing.datastreams) {
    const chart = defaultChartState(ds.id, ds.name);
    const canvas = el(`chart-${ds.id}`) as HTMLCanvasElement;
    const poller = new PanelPoller(api, chart, (points) =>
      draw(canvas, points, chart.flagOverlay));
    poller.start();
    activePollers.push(poller);
  }
}

// -- builder -------------------------------------------------------------------

async function renderBuilder(root: HTMLElement, dsId: number): Promise<void> {
  const draft: PipelineDraft = { variable: "", cards: [] };
  const things = await api.listThings();
  let thingUuid = "";
  for (const thing of things.things) {
    const ds = thing.datastreams.find((d) => d.id === dsId);
    if (ds) {
      draft.variable = ds.position;
      thingUuid = thing.uuid;
    }
  }
  root.innerHTML = `
    <h1>QC pipeline for datastream ${dsId}</h1>
    <div class="columns">
      <div class="card" id="cards"></div>
      <div class="card">
        <h2>Preview</h2>
        <canvas id="preview-chart" width="560" height="220"></canvas>
        <pre id="preview-status"></pre>
        <pre id="dsl-text"></pre>
        <button id="save">Save pipeline</button>
        <div id="save-result"></div>
      </div>
    </div>`;

  const canvas = el("preview-chart") as HTMLCanvasElement;
  const chart = defaultChartState(dsId, draft.variable);
  const poller = new PanelPoller(api, chart, () => {});
  await poller.tick();

  const preview = new PreviewController(api, dsId, (state) => {
    el("preview-status").textContent =
      state.status + (state.message ? `: ${state.message}` : "");
    const overlaid = chart.points.map((p) => ({
      ...p,
      flag: state.overlay.get(new Date(p.t).toISOString().replace(".000", "")) ??
            state.overlay.get(new Date(p.t).toISOString()) ?? "",
    }));
    draw(canvas, overlaid, true);
  });

  const renderCards = () => {
    el("cards").innerHTML = `
      <h2>Tests</h2>
      ${draft.cards.map((card, i) => `
        <fieldset>
          <legend>${escapeHtml(card.func)}</legend>
          ${Object.entries(card.kwargs).map(([k, v]) => `
            <label>${escapeHtml(k)}
              <input data-card="${i}" data-kwarg="${escapeHtml(k)}"
                     value="${escapeHtml(String(v))}">
            </label>`).join("")}
          <button data-remove="${i}">remove</button>
        </fieldset>`).join("")}
      <select id="add-func">
        ${QC_FUNCTIONS.map((f) => `<option value="${f.name}">${f.label}</option>`).join("")}
      </select>
      <button id="add-card">Add test</button>`;
    el("add-card").addEventListener("click", () => {
      const name = (el("add-func") as HTMLSelectElement).value;
      const meta = QC_FUNCTIONS.find((f) => f.name === name)!;
      const kwargs: DraftCard["kwargs"] = {};
      for (const param of meta.params) {
        if (param.required) kwargs[param.name] = param.kind === "string" ? "" : 0;
      }
      draft.cards.push({ func: name, kwargs });
      renderCards();
      onEdit();
    });
    root.querySelectorAll("button[data-remove]").forEach((button) =>
      button.addEventListener("click", (event) => {
        draft.cards.splice(Number((event.target as HTMLElement).dataset.remove), 1);
        renderCards();
        onEdit();
      }));
    root.querySelectorAll("input[data-card]").forEach((input) =>
      input.addEventListener("change", (event) => {
        const target = event.target as HTMLInputElement;
        const card = draft.cards[Number(target.dataset.card)];
        const raw = target.value;
        const asNumber = Number(raw);
        card.kwargs[target.dataset.kwarg!] =
          raw !== "" && !Number.isNaN(asNumber) ? asNumber : raw;
        onEdit();
      }));
  };

  const onEdit = () => {
    el("dsl-text").textContent = serializeDraft(draft);
    preview.update(draft);
  };

  el("save").addEventListener("click", async () => {
    try {
      const { attachment } = await preview.save(thingUuid, draft);
      el("save-result").innerHTML =
        `<p>saved attachment ${attachment.id} (hash ${attachment.config_hash.slice(0, 12)})</p>`;
    } catch (error) {
      el("save-result").innerHTML = `<p class="error">${escapeHtml(
        error instanceof Error ? error.message : String(error))}</p>`;
    }
  });

  renderCards();
  onEdit();
}

// -- shared dashboard -------------------------------------------------------------

async function renderShared(root: HTMLElement, token: string): Promise<void> {
  try {
    const { descriptor, panels } = await loadSharedDashboard(api, token, () => {});
    root.innerHTML = `
      <h1>Shared dashboard</h1>
      ${descriptor.panels.map((panel) => `
        <div class="card">
          <h2>${escapeHtml(panel.title)}</h2>
          <canvas id="share-${panel.datastream_id}" width="860" height="200"></canvas>
        </div>`).join("")}`;
    for (const panel of panels) {
      const canvas = el(`share-${panel.chart.datastreamId}`) as HTMLCanvasElement;
      const poller = new PanelPoller(
        api, panel.chart,
        (points) => draw(canvas, points, panel.chart.flagOverlay),
        undefined, undefined,
        descriptor.panels.find(
          (p) => p.datastream_id === panel.chart.datastreamId)?.data_url);
      poller.start();
      activePollers.push(poller);
    }
  } catch (error) {
    root.innerHTML = `<h1>Dashboard unavailable</h1>
      <p class="error">${escapeHtml(
        error instanceof RequestError && error.status === 404
          ? "unknown or revoked share token"
          : String(error))}</p>`;
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
