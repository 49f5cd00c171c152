/** View model for the control panel.
 *
 * A PanelModel folds event records and REST snapshots into one plain
 * state object the rendering layer can paint from.  It is deliberately
 * DOM-free: tests drive it with recorded event sequences and assert on
 * the resulting state, no browser required.
 *
 * Device rows are authoritative only in REST responses.  Records merely
 * hint that they went stale (`applyRecord` returns true), and the caller
 * is expected to refetch `/api/devices`.  Everything else (tickets,
 * traffic, phase, channel) is derived directly from the stream.
 */

import type {
  ChannelConfig,
  DeviceRow,
  DevicesPayload,
  EventRecord,
  StateSnapshot,
  TicketDict,
} from "./types.js";

export type Lane = "sms" | "serial" | "control";

export interface TrafficEntry {
  seq: number;
  ts: number;
  lane: Lane;
  kind: string;
  src: string;
  dst: string;
  text: string;
}

export interface TicketRow {
  id: string;
  utterance: string;
  wire: string;
  device: string;
  index: number;
  action: string;
  state: string;
  attempts: number;
  submittedAt: number;
  resolvedAt: number | null;
  /** Confirmation text as the user phone renders it, null until resolved. */
  ack: string | null;
}

export interface DeviceTile {
  kind: string;
  index: number;
  name: string;
  relayOn: boolean;
  effectiveOn: boolean;
  failureMode: string;
  failureP: number | null;
}

export interface PanelState {
  connected: boolean;
  runMode: string;
  seed: number | null;
  logPath: string | null;
  clock: number;
  phase: string;
  supplyOn: boolean;
  devices: DeviceTile[];
  tickets: TicketRow[];
  traffic: TrafficEntry[];
  channel: ChannelConfig | null;
  lastSeq: number;
}

// oldest entries are dropped past this point
export const TRAFFIC_LIMIT = 250;

export function initialState(): PanelState {
  return {
    connected: false,
    runMode: "",
    seed: null,
    logPath: null,
    clock: 0,
    phase: "",
    supplyOn: false,
    devices: [],
    tickets: [],
    traffic: [],
    channel: null,
    lastSeq: -1,
  };
}

/** Reconstruct the acknowledgement text for a resolved ticket. */
export function ackLine(ticket: {
  device: string;
  index: number;
  action: string;
  state: string;
}): string | null {
  const base = `${ticket.device} ${ticket.index} ${ticket.action.toLowerCase()}`;
  if (ticket.state === "ACKED_OK") {
    return base;
  }
  if (ticket.state === "ACKED_FAIL") {
    return `${base} 0`;
  }
  return null;
}

function asciiBytes(bytes: number[]): string {
  let out = "";
  for (const b of bytes) {
    out +=
      b >= 32 && b < 127
        ? String.fromCharCode(b)
        : `\\x${b.toString(16).padStart(2, "0")}`;
  }
  return out;
}

function summarize(record: EventRecord): { lane: Lane; text: string } {
  const p = record.payload as Record<string, any>;
  switch (record.kind) {
    case "RUN_START":
      return {
        lane: "control",
        text: `run start, seed ${p.scenario?.seed} (${p.scenario?.run_mode})`,
      };
    case "PHASE":
      return { lane: "control", text: `phase ${p.phase}` };
    case "BT_DISCOVERY":
      return {
        lane: "control",
        text: p.found
          ? `phone found on attempt ${p.attempt}`
          : `no phone, attempt ${p.attempt}`,
      };
    case "COMMAND":
      return { lane: "control", text: `"${p.utterance}"` };
    case "TICKET":
      return {
        lane: "control",
        text: `${p.id} ${p.state} (attempt ${p.attempts})`,
      };
    case "SMS_SEND":
    case "SMS_DELIVER":
      return { lane: "sms", text: String(p.text) };
    case "SMS_LOST":
      return { lane: "sms", text: `lost: ${p.text}` };
    case "SMS_DUP":
      return { lane: "sms", text: `duplicated: ${p.text}` };
    case "SERIAL_SEND":
      return {
        lane: "serial",
        text: asciiBytes(p.bytes ?? []) + (p.corrupt ? " [corrupt]" : ""),
      };
    case "SERIAL_DELIVER":
      return { lane: "serial", text: asciiBytes(p.bytes ?? []) };
    case "FRAME_DROP":
      return {
        lane: "serial",
        text: `dropped (${p.reason}): ${
          p.text !== undefined ? p.text : asciiBytes(p.bytes ?? [])
        }`,
      };
    case "ACTUATE":
      return {
        lane: "control",
        text: `${record.dst} ${p.action}, relay ${p.relay_on ? "on" : "off"}`,
      };
    case "VERIFY":
      return {
        lane: "control",
        text: `${record.dst} verify ${p.ok ? "ok" : "FAILED"}`,
      };
    case "ACK_DISCARD":
      return { lane: "control", text: `${p.reason} ack: ${p.text}` };
    case "CONFIG":
      return { lane: "control", text: "channel reconfigured" };
    case "FAULT":
      return {
        lane: "control",
        text:
          `${p.device} ${p.failure?.mode}` +
          (p.failure?.p !== undefined ? ` p=${p.failure.p}` : ""),
      };
    default:
      return { lane: "control", text: JSON.stringify(record.payload) };
  }
}

function tileFromRow(row: DeviceRow): DeviceTile {
  return {
    kind: row.kind,
    index: row.index,
    name: `${row.kind}${row.index}`,
    relayOn: row.relay_on,
    effectiveOn: row.effective_on,
    failureMode: row.failure.mode,
    failureP: row.failure.p ?? null,
  };
}

export class PanelModel {
  readonly state: PanelState = initialState();

  /** Seed everything from GET /api/state. */
  applyState(snap: StateSnapshot): void {
    const s = this.state;
    s.runMode = snap.run_mode;
    s.seed = snap.seed;
    s.logPath = snap.log_path;
    s.clock = snap.now;
    s.phase = snap.phase;
    s.channel = snap.sms;
    this.applyDevices({ devices: snap.devices, supply_on: snap.supply_on });
    for (const ticket of snap.tickets) {
      this.upsertTicket(ticket);
    }
  }

  /** Replace device tiles from GET /api/devices. */
  applyDevices(payload: DevicesPayload): void {
    this.state.supplyOn = payload.supply_on;
    this.state.devices = payload.devices.map(tileFromRow);
  }

  applyChannel(config: ChannelConfig): void {
    this.state.channel = config;
  }

  setConnected(connected: boolean): void {
    this.state.connected = connected;
  }

  /**
   * Fold one stream record into the state.
   *
   * Returns true when the record implies the device tiles are stale and
   * `/api/devices` should be refetched.  Records already seen (stream
   * replay after reconnect) are ignored.
   */
  applyRecord(record: EventRecord): boolean {
    const s = this.state;
    if (record.seq <= s.lastSeq) {
      return false;
    }
    s.lastSeq = record.seq;
    if (record.ts > s.clock) {
      s.clock = record.ts;
    }

    let devicesStale = false;
    switch (record.kind) {
      case "RUN_START": {
        const scenario = (record.payload as any).scenario ?? {};
        s.seed = scenario.seed ?? s.seed;
        s.runMode = scenario.run_mode ?? s.runMode;
        devicesStale = true;
        break;
      }
      case "PHASE":
        s.phase = String((record.payload as any).phase);
        break;
      case "TICKET":
        this.upsertTicket(record.payload as unknown as TicketDict);
        break;
      case "ACTUATE":
      case "VERIFY":
      case "FAULT":
        devicesStale = true;
        break;
      case "CONFIG":
        s.channel = (record.payload as any).sms as ChannelConfig;
        break;
      default:
        break;
    }

    const { lane, text } = summarize(record);
    s.traffic.unshift({
      seq: record.seq,
      ts: record.ts,
      lane,
      kind: record.kind,
      src: record.src,
      dst: record.dst,
      text,
    });
    if (s.traffic.length > TRAFFIC_LIMIT) {
      s.traffic.length = TRAFFIC_LIMIT;
    }
    return devicesStale;
  }

  private upsertTicket(ticket: TicketDict): void {
    const row: TicketRow = {
      id: ticket.id,
      utterance: ticket.utterance,
      wire: ticket.wire,
      device: ticket.device,
      index: ticket.index,
      action: ticket.action,
      state: ticket.state,
      attempts: ticket.attempts,
      submittedAt: ticket.submitted_at,
      resolvedAt: ticket.resolved_at,
      ack: ackLine(ticket),
    };
    const existing = this.state.tickets.findIndex((t) => t.id === row.id);
    if (existing >= 0) {
      this.state.tickets[existing] = row;
    } else {
      this.state.tickets.unshift(row);
    }
  }
}
