/** Browser entry point: binds the view model to the DOM.
 *
 * All state lives in a PanelModel; this file only schedules renders,
 * wires form events to the API client, and refetches device rows when
 * the stream hints they changed.
 */

import { ApiError, PanelApi, openEvents } from "./api.js";
import { PanelModel } from "./model.js";
import type { DeviceTile, TicketRow, TrafficEntry } from "./model.js";

const api = new PanelApi();
const model = new PanelModel();

const UTTERANCE_PHRASE: Record<string, string> = {
  SUPPLY: "Main Switch",
  LIGHT: "Light",
  FAN: "Fan",
};

const TRAFFIC_SHOWN = 120;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function fmtSeconds(value: number): string {
  return `${value.toFixed(1)}s`;
}

// ---------------------------------------------------------------- flash line

let flashTimer: number | undefined;

function flash(message: string, isError = false): void {
  const node = el<HTMLDivElement>("flash");
  node.textContent = message;
  node.className = isError ? "flash error" : "flash ok";
  if (flashTimer !== undefined) {
    clearTimeout(flashTimer);
  }
  flashTimer = window.setTimeout(() => {
    node.textContent = "";
    node.className = "flash";
  }, 4000);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.message;
  }
  return err instanceof Error ? err.message : String(err);
}

// ------------------------------------------------------------------- header

function renderHeader(): void {
  const s = model.state;
  el("stat-phase").textContent = s.phase || "-";
  el("stat-clock").textContent = fmtSeconds(s.clock);
  el("stat-mode").textContent = s.runMode || "-";
  el("stat-seed").textContent = s.seed === null ? "-" : String(s.seed);
  const badge = el("stream-badge");
  badge.textContent = s.connected ? "stream: live" : "stream: reconnecting";
  badge.className = s.connected ? "badge on" : "badge off";
  el("sim-card").hidden = s.runMode !== "stepped";
  const supply = el("supply-tag");
  supply.textContent = s.supplyOn ? "mains on" : "mains off";
  supply.className = s.supplyOn ? "tag on" : "tag";
}

// ------------------------------------------------------------------ devices

interface TileDom {
  root: HTMLDivElement;
  lamp: HTMLSpanElement;
  relay: HTMLSpanElement;
  fault: HTMLSpanElement;
  modeSelect: HTMLSelectElement;
  probInput: HTMLInputElement;
}

// keyed by device name so selects keep their value across renders
const tileDom = new Map<string, TileDom>();

function utteranceFor(tile: DeviceTile, action: "On" | "Off"): string {
  const phrase = UTTERANCE_PHRASE[tile.kind] ?? tile.kind;
  const suffix = tile.index > 1 ? ` ${tile.index}` : "";
  return `${phrase} ${action}${suffix}`;
}

async function sendUtterance(utterance: string): Promise<void> {
  try {
    const out = await api.submit(utterance);
    flash(`queued ${out.ticket.slice(0, 8)}: ${utterance}`);
  } catch (err) {
    flash(describe(err), true);
  }
}

function buildTile(tile: DeviceTile): TileDom {
  const root = document.createElement("div");
  root.className = "tile";

  const head = document.createElement("div");
  head.className = "tile-head";
  const lamp = document.createElement("span");
  lamp.className = "lamp";
  const name = document.createElement("b");
  name.textContent = tile.name;
  head.append(lamp, name);

  const relay = document.createElement("span");
  relay.className = "muted small";

  const fault = document.createElement("span");
  fault.className = "fault-tag";

  const switches = document.createElement("div");
  switches.className = "row";
  for (const action of ["On", "Off"] as const) {
    const btn = document.createElement("button");
    btn.textContent = action;
    btn.addEventListener("click", () => {
      void sendUtterance(utteranceFor(tile, action));
    });
    switches.append(btn);
  }

  const faultRow = document.createElement("div");
  faultRow.className = "row";
  const modeSelect = document.createElement("select");
  for (const mode of ["NONE", "STUCK", "FLAKY"]) {
    const opt = document.createElement("option");
    opt.value = mode;
    opt.textContent = mode.toLowerCase();
    modeSelect.append(opt);
  }
  const probInput = document.createElement("input");
  probInput.type = "number";
  probInput.min = "0";
  probInput.max = "1";
  probInput.step = "0.1";
  probInput.value = "0.5";
  probInput.title = "failure probability (flaky only)";
  probInput.className = "prob";
  const apply = document.createElement("button");
  apply.textContent = "Set fault";
  apply.addEventListener("click", () => {
    const mode = modeSelect.value;
    const p = mode === "FLAKY" ? Number(probInput.value) : undefined;
    api
      .setFailure(tile.kind, tile.index, mode, p)
      .then(() => refreshDevices())
      .catch((err) => flash(describe(err), true));
  });
  faultRow.append(modeSelect, probInput, apply);

  root.append(head, relay, fault, switches, faultRow);
  return { root, lamp, relay, fault, modeSelect, probInput };
}

function renderDevices(): void {
  const container = el<HTMLDivElement>("devices");
  const seen = new Set<string>();
  for (const tile of model.state.devices) {
    seen.add(tile.name);
    let dom = tileDom.get(tile.name);
    if (dom === undefined) {
      dom = buildTile(tile);
      tileDom.set(tile.name, dom);
      container.append(dom.root);
    }
    dom.lamp.className = tile.effectiveOn ? "lamp lit" : "lamp";
    dom.relay.textContent = `relay ${tile.relayOn ? "on" : "off"}`;
    if (tile.failureMode === "NONE") {
      dom.fault.textContent = "";
      dom.fault.className = "fault-tag";
    } else {
      const p = tile.failureP !== null ? ` p=${tile.failureP}` : "";
      dom.fault.textContent = `${tile.failureMode.toLowerCase()}${p}`;
      dom.fault.className = "fault-tag active";
    }
  }
  for (const [name, dom] of tileDom) {
    if (!seen.has(name)) {
      dom.root.remove();
      tileDom.delete(name);
    }
  }
}

// ------------------------------------------------------------------ tickets

function ticketRow(row: TicketRow): HTMLTableRowElement {
  const tr = document.createElement("tr");

  const when = document.createElement("td");
  when.textContent = fmtSeconds(row.submittedAt);
  when.className = "muted";

  const utterance = document.createElement("td");
  utterance.textContent = row.utterance;

  const wire = document.createElement("td");
  wire.textContent = row.wire;
  wire.className = "mono";

  const state = document.createElement("td");
  const badge = document.createElement("span");
  badge.textContent = row.state;
  badge.className = `st st-${row.state}`;
  state.append(badge);

  const tries = document.createElement("td");
  tries.textContent = String(row.attempts);

  const ack = document.createElement("td");
  ack.className = "mono";
  if (row.ack !== null) {
    ack.textContent = row.ack;
  } else if (row.state === "PENDING") {
    ack.textContent = "waiting";
    ack.className = "muted";
  } else {
    ack.textContent = "-";
    ack.className = "muted";
  }

  tr.append(when, utterance, wire, state, tries, ack);
  return tr;
}

function renderTickets(): void {
  const body = el<HTMLTableSectionElement>("ticket-rows");
  body.replaceChildren(...model.state.tickets.map(ticketRow));
}

// ------------------------------------------------------------------ traffic

function trafficLine(entry: TrafficEntry): HTMLDivElement {
  const line = document.createElement("div");
  line.className = `traffic-line lane-${entry.lane}`;
  const ts = document.createElement("span");
  ts.className = "muted";
  ts.textContent = fmtSeconds(entry.ts).padStart(8);
  const kind = document.createElement("span");
  kind.className = "kind";
  kind.textContent = entry.kind;
  const text = document.createElement("span");
  text.textContent = entry.text;
  line.append(ts, kind, text);
  return line;
}

function renderTraffic(): void {
  const log = el<HTMLDivElement>("traffic");
  log.replaceChildren(
    ...model.state.traffic.slice(0, TRAFFIC_SHOWN).map(trafficLine),
  );
}

// ------------------------------------------------------------------ channel

const CHANNEL_FIELDS = [
  ["ch-base", "base_delay_s"],
  ["ch-jitter", "jitter_s"],
  ["ch-loss", "loss_prob"],
  ["ch-dup", "dup_prob"],
  ["ch-reorder", "reorder_window_s"],
] as const;

function fillChannelForm(force: boolean): void {
  const cfg = model.state.channel;
  if (cfg === null) {
    return;
  }
  const form = el<HTMLFormElement>("channel-form");
  if (!force && form.contains(document.activeElement)) {
    return; // do not clobber an edit in progress
  }
  for (const [id, key] of CHANNEL_FIELDS) {
    el<HTMLInputElement>(id).value = String(cfg[key]);
  }
}

function bindChannelForm(): void {
  el<HTMLFormElement>("channel-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const cfg = {
      base_delay_s: Number(el<HTMLInputElement>("ch-base").value),
      jitter_s: Number(el<HTMLInputElement>("ch-jitter").value),
      loss_prob: Number(el<HTMLInputElement>("ch-loss").value),
      dup_prob: Number(el<HTMLInputElement>("ch-dup").value),
      reorder_window_s: Number(el<HTMLInputElement>("ch-reorder").value),
    };
    api
      .setChannel(cfg)
      .then((applied) => {
        model.applyChannel(applied);
        fillChannelForm(true);
        flash("channel updated");
      })
      .catch((err) => flash(describe(err), true));
  });
}

// ---------------------------------------------------------------- sim clock

function bindStepButtons(): void {
  for (const btn of el("sim-card").querySelectorAll<HTMLButtonElement>(
    "button[data-step]",
  )) {
    btn.addEventListener("click", () => {
      const seconds = Number(btn.dataset.step);
      api
        .step(seconds)
        .then((out) => {
          model.state.clock = out.now;
          el("step-note").textContent = `${out.processed} events processed`;
          scheduleRender();
        })
        .catch((err) => flash(describe(err), true));
    });
  }
}

// ---------------------------------------------------------------- rendering

let renderQueued = false;

function scheduleRender(): void {
  if (renderQueued) {
    return;
  }
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    render();
  });
}

function render(): void {
  renderHeader();
  renderDevices();
  renderTickets();
  renderTraffic();
}

// ------------------------------------------------------- device refetching

let deviceFetchActive = false;
let deviceFetchQueued = false;

async function refreshDevices(): Promise<void> {
  if (deviceFetchActive) {
    deviceFetchQueued = true;
    return;
  }
  deviceFetchActive = true;
  try {
    do {
      deviceFetchQueued = false;
      model.applyDevices(await api.devices());
    } while (deviceFetchQueued);
  } catch {
    // transient; the next stream hint will retry
  }
  deviceFetchActive = false;
  scheduleRender();
}

// --------------------------------------------------------------------- boot

function bindCommandForm(): void {
  const input = el<HTMLInputElement>("utterance");
  el<HTMLFormElement>("command-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const utterance = input.value.trim();
    if (utterance === "") {
      return;
    }
    input.value = "";
    void sendUtterance(utterance);
  });
}

async function boot(): Promise<void> {
  bindCommandForm();
  bindChannelForm();
  bindStepButtons();
  try {
    model.applyState(await api.state());
  } catch (err) {
    flash(`cannot reach service: ${describe(err)}`, true);
  }
  fillChannelForm(true);
  render();
  openEvents({
    onRecord(record) {
      if (model.applyRecord(record)) {
        void refreshDevices();
      }
      scheduleRender();
    },
    onStatus(connected) {
      model.setConnected(connected);
      scheduleRender();
    },
  });
}

void boot();
