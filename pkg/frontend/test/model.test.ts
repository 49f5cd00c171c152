/** Reducer tests driven by realistic record sequences.
 *
 * The two long scenarios mirror what the service actually streams for a
 * clean LIGHT switch-on and for a fully lossy channel, so they double as
 * the panel's acceptance checks without needing a browser.
 */

import { describe, expect, it } from "vitest";

import { PanelModel, TRAFFIC_LIMIT, ackLine, initialState } from "../src/model";
import type { EventRecord, StateSnapshot, TicketDict } from "../src/types";

let autoSeq = 0;

function rec(
  kind: string,
  payload: Record<string, unknown>,
  extra: Partial<EventRecord> = {},
): EventRecord {
  return {
    seq: extra.seq ?? autoSeq++,
    ts: extra.ts ?? 0,
    kind,
    src: extra.src ?? "sim",
    dst: extra.dst ?? "sim",
    payload,
  };
}

function ticketPayload(overrides: Partial<TicketDict> = {}): TicketDict {
  return {
    id: "t1",
    utterance: "Light On",
    wire: "LON1E",
    device: "LIGHT",
    index: 1,
    action: "ON",
    state: "PENDING",
    attempts: 1,
    submitted_at: 0.0,
    resolved_at: null,
    ...overrides,
  };
}

const CLEAN_CHANNEL = {
  base_delay_s: 2.0,
  jitter_s: 0.0,
  loss_prob: 0.0,
  dup_prob: 0.0,
  reorder_window_s: 0.0,
};

describe("light switch-on round trip", () => {
  it("shows a pending ticket, flags the tiles stale, then resolves", () => {
    autoSeq = 0;
    const model = new PanelModel();
    const wireBytes = [76, 79, 78, 49, 69]; // "LON1E"

    model.applyRecord(rec("COMMAND", { utterance: "Light On" }));
    model.applyRecord(
      rec("TICKET", ticketPayload() as unknown as Record<string, unknown>),
    );

    expect(model.state.tickets).toHaveLength(1);
    const pending = model.state.tickets[0];
    expect(pending.state).toBe("PENDING");
    expect(pending.wire).toBe("LON1E");
    expect(pending.ack).toBeNull();

    model.applyRecord(rec("SMS_SEND", { text: "LON1E" }));
    model.applyRecord(rec("SMS_DELIVER", { text: "LON1E" }, { ts: 2.0 }));
    model.applyRecord(
      rec("SERIAL_SEND", { bytes: wireBytes, corrupt: false }, { ts: 2.0 }),
    );
    model.applyRecord(rec("SERIAL_DELIVER", { bytes: wireBytes }, { ts: 2.01 }));

    // the actuation record is the stream update that makes tiles stale
    const stale = model.applyRecord(
      rec("ACTUATE", { action: "ON", relay_on: true }, { dst: "LIGHT1", ts: 2.01 }),
    );
    expect(stale).toBe(true);

    // the panel refetches /api/devices in response; the tile flips
    model.applyDevices({
      supply_on: true,
      devices: [
        {
          kind: "LIGHT",
          index: 1,
          relay_on: true,
          failure: { mode: "NONE" },
          effective_on: true,
        },
      ],
    });
    const tile = model.state.devices[0];
    expect(tile.name).toBe("LIGHT1");
    expect(tile.relayOn).toBe(true);
    expect(tile.effectiveOn).toBe(true);

    expect(
      model.applyRecord(
        rec("VERIFY", { action: "ON", ok: true }, { dst: "LIGHT1", ts: 2.1 }),
      ),
    ).toBe(true);
    model.applyRecord(rec("SMS_SEND", { text: "LIGHT 1 on" }, { ts: 2.1 }));
    model.applyRecord(rec("SMS_DELIVER", { text: "LIGHT 1 on" }, { ts: 4.1 }));
    model.applyRecord(
      rec(
        "TICKET",
        ticketPayload({
          state: "ACKED_OK",
          resolved_at: 4.1,
        }) as unknown as Record<string, unknown>,
        { ts: 4.1 },
      ),
    );

    expect(model.state.tickets).toHaveLength(1); // upserted, not duplicated
    const resolved = model.state.tickets[0];
    expect(resolved.state).toBe("ACKED_OK");
    expect(resolved.ack).toBe("LIGHT 1 on");
    expect(resolved.resolvedAt).toBe(4.1);
    expect(model.state.clock).toBe(4.1);
  });
});

describe("fully lossy channel", () => {
  it("shows each retry and ends in TIMED_OUT with no confirmation", () => {
    autoSeq = 0;
    const model = new PanelModel();

    model.applyRecord(
      rec("CONFIG", { sms: { ...CLEAN_CHANNEL, loss_prob: 1.0 } }),
    );
    expect(model.state.channel?.loss_prob).toBe(1.0);

    const attemptsSeen: number[] = [];
    for (let attempt = 1; attempt <= 3; attempt++) {
      const ts = (attempt - 1) * 30.0;
      model.applyRecord(
        rec(
          "TICKET",
          ticketPayload({ attempts: attempt }) as unknown as Record<
            string,
            unknown
          >,
          { ts },
        ),
      );
      model.applyRecord(rec("SMS_SEND", { text: "LON1E" }, { ts }));
      model.applyRecord(rec("SMS_LOST", { text: "LON1E" }, { ts }));
      attemptsSeen.push(model.state.tickets[0].attempts);
      expect(model.state.tickets[0].state).toBe("PENDING");
    }
    expect(attemptsSeen).toEqual([1, 2, 3]);

    model.applyRecord(
      rec(
        "TICKET",
        ticketPayload({
          attempts: 3,
          state: "TIMED_OUT",
          resolved_at: 90.0,
        }) as unknown as Record<string, unknown>,
        { ts: 90.0 },
      ),
    );

    expect(model.state.tickets).toHaveLength(1);
    const row = model.state.tickets[0];
    expect(row.state).toBe("TIMED_OUT");
    expect(row.ack).toBeNull();
    expect(row.resolvedAt).toBe(90.0);

    const sends = model.state.traffic.filter((t) => t.kind === "SMS_SEND");
    const losses = model.state.traffic.filter((t) => t.kind === "SMS_LOST");
    expect(sends).toHaveLength(3);
    expect(losses).toHaveLength(3);
    expect(losses[0].text).toBe("lost: LON1E");
  });
});

describe("stream bookkeeping", () => {
  it("ignores records replayed after a reconnect", () => {
    const model = new PanelModel();
    const first = rec("PHASE", { phase: "IDLE" }, { seq: 5, ts: 1.0 });
    expect(model.applyRecord(first)).toBe(false);
    const before = model.state.traffic.length;
    model.applyRecord(
      rec("PHASE", { phase: "EXECUTING" }, { seq: 3, ts: 0.5 }),
    );
    expect(model.state.traffic.length).toBe(before);
    expect(model.state.phase).toBe("IDLE");
    expect(model.state.lastSeq).toBe(5);
  });

  it("keeps the clock monotonic across reordered timestamps", () => {
    const model = new PanelModel();
    model.applyRecord(rec("PHASE", { phase: "IDLE" }, { seq: 1, ts: 10.0 }));
    model.applyRecord(
      rec("SMS_DELIVER", { text: "x" }, { seq: 2, ts: 8.0 }),
    );
    expect(model.state.clock).toBe(10.0);
  });

  it("caps the traffic backlog", () => {
    const model = new PanelModel();
    for (let i = 0; i < TRAFFIC_LIMIT + 50; i++) {
      model.applyRecord(rec("SMS_SEND", { text: `m${i}` }, { seq: i }));
    }
    expect(model.state.traffic).toHaveLength(TRAFFIC_LIMIT);
    expect(model.state.traffic[0].text).toBe(`m${TRAFFIC_LIMIT + 49}`);
  });

  it("marks tiles stale on faults and fresh runs but not on chatter", () => {
    const model = new PanelModel();
    expect(
      model.applyRecord(
        rec("FAULT", { device: "FAN1", failure: { mode: "STUCK" } }, { seq: 0 }),
      ),
    ).toBe(true);
    expect(
      model.applyRecord(
        rec(
          "RUN_START",
          { scenario: { seed: 7, run_mode: "realtime" } },
          { seq: 1 },
        ),
      ),
    ).toBe(true);
    expect(model.state.seed).toBe(7);
    expect(model.state.runMode).toBe("realtime");
    expect(
      model.applyRecord(rec("SMS_SEND", { text: "LON1E" }, { seq: 2 })),
    ).toBe(false);
    expect(
      model.applyRecord(rec("PHASE", { phase: "IDLE" }, { seq: 3 })),
    ).toBe(false);
  });
});

describe("traffic rendering", () => {
  it("shows serial frames as readable bytes", () => {
    const model = new PanelModel();
    model.applyRecord(
      rec("SERIAL_SEND", { bytes: [76, 79, 78, 49, 69], corrupt: false }, { seq: 0 }),
    );
    model.applyRecord(
      rec("SERIAL_SEND", { bytes: [76, 79, 255, 49, 69], corrupt: true }, { seq: 1 }),
    );
    model.applyRecord(
      rec(
        "FRAME_DROP",
        { reason: "bad_grammar", bytes: [90, 90] },
        { seq: 2 },
      ),
    );
    const [drop, corrupt, clean] = model.state.traffic;
    expect(clean.text).toBe("LON1E");
    expect(clean.lane).toBe("serial");
    expect(corrupt.text).toBe("LO\\xff1E [corrupt]");
    expect(drop.text).toBe("dropped (bad_grammar): ZZ");
  });

  it("labels discovery, acks, and discards", () => {
    const model = new PanelModel();
    model.applyRecord(
      rec("BT_DISCOVERY", { found: false, attempt: 2 }, { seq: 0 }),
    );
    model.applyRecord(
      rec("ACK_DISCARD", { reason: "orphan", text: "FAN 1 on" }, { seq: 1 }),
    );
    model.applyRecord(
      rec("VERIFY", { action: "ON", ok: false }, { seq: 2, dst: "FAN1" }),
    );
    const [verify, discard, scan] = model.state.traffic;
    expect(scan.text).toBe("no phone, attempt 2");
    expect(discard.text).toBe("orphan ack: FAN 1 on");
    expect(verify.text).toBe("FAN1 verify FAILED");
  });
});

describe("snapshots", () => {
  const snapshot: StateSnapshot = {
    now: 54.015625,
    phase: "IDLE",
    supply_on: false,
    devices: [
      {
        kind: "SUPPLY",
        index: 1,
        relay_on: false,
        failure: { mode: "NONE" },
        effective_on: false,
      },
      {
        kind: "FAN",
        index: 1,
        relay_on: false,
        failure: { mode: "FLAKY", p: 0.5 },
        effective_on: false,
      },
    ],
    tickets: [
      ticketPayload({ id: "t9", state: "ACKED_FAIL", resolved_at: 40.0 }),
    ],
    sms: CLEAN_CHANNEL,
    run_mode: "stepped",
    seed: 42,
    log_path: "runs/x.jsonl",
  };

  it("seeds the whole panel from GET /api/state", () => {
    const model = new PanelModel();
    model.applyState(snapshot);
    const s = model.state;
    expect(s.clock).toBe(54.015625);
    expect(s.phase).toBe("IDLE");
    expect(s.runMode).toBe("stepped");
    expect(s.seed).toBe(42);
    expect(s.channel).toEqual(CLEAN_CHANNEL);
    expect(s.devices.map((d) => d.name)).toEqual(["SUPPLY1", "FAN1"]);
    expect(s.devices[1].failureMode).toBe("FLAKY");
    expect(s.devices[1].failureP).toBe(0.5);
    expect(s.tickets[0].ack).toBe("LIGHT 1 on 0");
  });

  it("starts from a clean slate", () => {
    expect(initialState().lastSeq).toBe(-1);
    expect(initialState().tickets).toEqual([]);
  });
});

describe("ack reconstruction", () => {
  it("matches the user phone text for each terminal state", () => {
    const base = { device: "LIGHT", index: 1, action: "ON" };
    expect(ackLine({ ...base, state: "ACKED_OK" })).toBe("LIGHT 1 on");
    expect(ackLine({ ...base, state: "ACKED_FAIL" })).toBe("LIGHT 1 on 0");
    expect(
      ackLine({ device: "FAN", index: 2, action: "OFF", state: "ACKED_OK" }),
    ).toBe("FAN 2 off");
    expect(ackLine({ ...base, state: "PENDING" })).toBeNull();
    expect(ackLine({ ...base, state: "TIMED_OUT" })).toBeNull();
  });
});
