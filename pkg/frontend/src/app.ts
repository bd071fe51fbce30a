/** Page bootstrap: session state, band list, annotation tools, run panel. */

import { ApiClient, ApiError, BandInfo, RunStatus } from "./api.js";
import { AnnotationStore, TARGET_PER_CLASS } from "./annotations.js";
import { buildRequest, defaultConfig, disabledReason, METHODS, RENDER_MODES, RunConfig } from "./run-panel.js";
import { Viewer } from "./viewer.js";
import { Viewport } from "./viewport.js";

const api = new ApiClient("");
const store = new AnnotationStore();
const viewport = new Viewport();
const config: RunConfig = defaultConfig();

let bands: BandInfo[] = [];
let inFlight = false;
let lastRun: RunStatus | null = null;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  node.append(...children);
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function setHint(text: string): void {
  byId("hint").textContent = text;
}

let sourceViewer: Viewer | null = null;
let resultViewer: Viewer | null = null;

async function boot(): Promise<void> {
  const session = await api.getSession();
  if (session.stack === null) {
    byId("stack-form").classList.remove("hidden");
    byId("load-stack").addEventListener("click", async () => {
      const manifest = byId<HTMLInputElement>("manifest-path").value.trim();
      if (manifest === "") return;
      try {
        await api.postStack(manifest);
        byId("stack-form").classList.add("hidden");
        await loadStack();
      } catch (err) {
        setHint(err instanceof ApiError ? err.message : String(err));
      }
    });
    return;
  }
  await loadStack();
}

async function loadStack(): Promise<void> {
  bands = await api.getBands();
  const list = byId("band-list");
  list.textContent = "";
  for (const b of bands) {
    const button = el(
      "button",
      { class: "band-button", "data-band": String(b.band_id) },
      `${b.band_id}: ${b.wavelength_nm} nm ${b.illumination}`,
    );
    button.addEventListener("click", () => showBand(b.band_id));
    list.append(button);
  }

  const source = byId<HTMLCanvasElement>("source-canvas");
  const result = byId<HTMLCanvasElement>("result-canvas");
  sourceViewer = new Viewer(source, viewport, store, setHint);
  resultViewer = new Viewer(result, viewport, null, setHint);
  buildClassButtons();
  buildRunPanel();
  bindAnnotationIO();
  showBand(bands[0]?.band_id ?? 0, true);
}

function showBand(bandId: number, fit = false): void {
  for (const button of document.querySelectorAll(".band-button")) {
    button.classList.toggle("active", button.getAttribute("data-band") === String(bandId));
  }
  sourceViewer?.setImage(api.bandUrl(bandId), () => {
    if (fit && sourceViewer !== null) {
      const size = sourceViewer.imageSize();
      const canvas = sourceViewer.canvas;
      if (size !== null) viewport.fit(size.width, size.height, canvas.width, canvas.height);
      sourceViewer.draw();
      resultViewer?.draw();
    }
  });
}

function buildClassButtons(): void {
  const bar = byId("class-bar");
  bar.textContent = "";
  for (const c of store.classes) {
    const badge = el("span", { class: "badge", id: `badge-${c.name}` }, "0/" + TARGET_PER_CLASS);
    const button = el("button", { class: "class-button", "data-class": c.name }, c.name, badge);
    button.style.setProperty("--class-color", c.color);
    button.addEventListener("click", () => {
      store.activeClass = c.name;
      for (const other of document.querySelectorAll(".class-button")) {
        other.classList.toggle("active", other.getAttribute("data-class") === c.name);
      }
    });
    if (c.name === store.activeClass) button.classList.add("active");
    bar.append(button);
  }
  updateBadges();
  // keep the badges and run gating live without threading callbacks through
  const origPlace = store.place.bind(store);
  store.place = (x, y, cls) => {
    const ok = origPlace(x, y, cls);
    if (ok) updateBadges();
    return ok;
  };
  const origRemove = store.removeNearest.bind(store);
  store.removeNearest = (x, y, d) => {
    const removed = origRemove(x, y, d);
    if (removed !== null) updateBadges();
    return removed;
  };
}

function updateBadges(): void {
  const counts = store.counts();
  for (const c of store.classes) {
    const badge = document.getElementById(`badge-${c.name}`);
    if (badge !== null) {
      badge.textContent = `${counts[c.name]}/${TARGET_PER_CLASS}`;
      badge.classList.toggle("met", counts[c.name] >= TARGET_PER_CLASS);
    }
  }
  updateRunButton();
}

function bindAnnotationIO(): void {
  byId("save-annotations").addEventListener("click", async () => {
    try {
      const ack = await api.putAnnotations(store.serialize());
      store.syncedVersion = ack.version;
      store.dirty = false;
      setHint(`saved annotation version ${ack.version}`);
    } catch (err) {
      setHint(err instanceof ApiError ? err.message : String(err));
    }
  });
  byId("export-annotations").addEventListener("click", () => {
    const blob = new Blob([store.serialize()], { type: "text/csv" });
    const link = el("a", { href: URL.createObjectURL(blob), download: "annotations.csv" });
    link.click();
    URL.revokeObjectURL(link.href);
  });
  byId<HTMLInputElement>("import-annotations").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file === undefined) return;
    try {
      store.load(await file.text());
      buildClassButtons();
      sourceViewer?.draw();
      setHint(`imported ${store.points.length} points`);
    } catch (err) {
      setHint(String(err));
    }
  });
}

function buildRunPanel(): void {
  const methodSel = byId<HTMLSelectElement>("method");
  methodSel.textContent = "";
  for (const m of METHODS) methodSel.append(el("option", { value: m }, m));
  methodSel.value = config.method;
  methodSel.addEventListener("change", () => {
    config.method = methodSel.value as RunConfig["method"];
    updateRunButton();
  });

  const modeSel = byId<HTMLSelectElement>("mode");
  modeSel.textContent = "";
  for (const m of RENDER_MODES) modeSel.append(el("option", { value: m }, m));
  modeSel.value = config.mode;
  modeSel.addEventListener("change", () => {
    config.mode = modeSel.value;
  });

  byId<HTMLInputElement>("k-input").addEventListener("change", (ev) => {
    const raw = (ev.target as HTMLInputElement).value.trim();
    config.k = raw === "" ? null : parseInt(raw, 10);
  });
  byId<HTMLInputElement>("swap-toggle").addEventListener("change", (ev) => {
    config.swapChannels = (ev.target as HTMLInputElement).checked;
  });

  byId("run-button").addEventListener("click", submitRun);
  updateRunButton();
}

function updateRunButton(): void {
  const button = byId<HTMLButtonElement>("run-button");
  const reason = disabledReason(config, store.counts(), inFlight);
  button.disabled = reason !== null;
  button.title = reason ?? "submit the run";
}

async function submitRun(): Promise<void> {
  if (disabledReason(config, store.counts(), inFlight) !== null) return;
  inFlight = true;
  updateRunButton();
  try {
    if (store.dirty || store.syncedVersion === 0) {
      const ack = await api.putAnnotations(store.serialize());
      store.syncedVersion = ack.version;
      store.dirty = false;
    }
    const { run_id } = await api.postRun(buildRequest(config));
    addRunRow(run_id, "QUEUED");
    const terminal = await api.pollRun(run_id, {
      intervalMs: 1000,
      onTick: (s) => addRunRow(run_id, s.status),
    });
    addRunRow(run_id, terminal.status);
    if (terminal.status === "FAILED") {
      setHint(terminal.error ?? "run failed");
    } else {
      lastRun = terminal;
      showResult(terminal);
    }
  } catch (err) {
    setHint(err instanceof ApiError ? err.message : String(err));
  } finally {
    inFlight = false;
    updateRunButton();
  }
}

function addRunRow(runId: string, status: string): void {
  const list = byId("run-list");
  let row = document.getElementById(`run-${runId}`);
  if (row === null) {
    row = el("div", { class: "run-row", id: `run-${runId}` });
    list.prepend(row);
  }
  row.textContent = `${runId} ${status}`;
  row.className = `run-row status-${status.toLowerCase()}`;
  if (status === "DONE") {
    row.addEventListener("click", async () => {
      const s = await api.getRun(runId);
      lastRun = s;
      showResult(s);
    });
  }
}

function showResult(run: RunStatus): void {
  if (run.preview !== null && resultViewer !== null) {
    resultViewer.setImage(api.artifactUrl(run.run_id, run.preview));
    byId("result-title").textContent = `${run.run_id}: ${run.preview}`;
  }
  const table = byId("metrics");
  table.textContent = "";
  if (run.metrics === null) return;
  table.append(
    el(
      "tr",
      {},
      ...["image", "db", "dunn"].map((h) => el("th", {}, h)),
    ),
  );
  for (const row of run.metrics.rows) {
    const isBest = row.image === run.metrics.best;
    const tr = el(
      "tr",
      { class: isBest ? "best" : "" },
      el("td", {}, row.image),
      el("td", {}, row.error !== null ? `ERROR: ${row.error}` : (row.db?.toFixed(4) ?? "n/a")),
      el("td", {}, row.dunn !== null && row.dunn !== undefined ? row.dunn.toFixed(4) : "n/a"),
    );
    tr.addEventListener("click", () => {
      if (lastRun !== null && resultViewer !== null) {
        resultViewer.setImage(api.artifactUrl(lastRun.run_id, row.image));
        byId("result-title").textContent = `${lastRun.run_id}: ${row.image}`;
      }
    });
    table.append(tr);
  }
}

document.addEventListener("DOMContentLoaded", () => {
  boot().catch((err) => setHint(String(err)));
});
