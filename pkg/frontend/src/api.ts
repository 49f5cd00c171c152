/** Thin typed client for the operator service HTTP API and event stream. */

import type {
  ChannelConfig,
  DeviceRow,
  DevicesPayload,
  EventRecord,
  StateSnapshot,
  StepResult,
  TicketDict,
} from "./types.js";

const JSON_HEADERS = { "Content-Type": "application/json" };

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class PanelApi {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(base = "", fetchImpl?: FetchLike) {
    this.base = base;
    // bound wrapper: a bare `fetch` reference loses its window binding
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      const detail =
        body && typeof body.detail === "string"
          ? body.detail
          : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }

  state(): Promise<StateSnapshot> {
    return this.request("/api/state");
  }

  devices(): Promise<DevicesPayload> {
    return this.request("/api/devices");
  }

  channel(): Promise<ChannelConfig> {
    return this.request("/api/channel");
  }

  setChannel(config: ChannelConfig): Promise<ChannelConfig> {
    return this.request("/api/channel", {
      method: "PUT",
      headers: JSON_HEADERS,
      body: JSON.stringify(config),
    });
  }

  submit(utterance: string): Promise<{ ticket: string }> {
    return this.request("/api/commands", {
      method: "POST",
      headers: JSON_HEADERS,
      body: JSON.stringify({ utterance }),
    });
  }

  tickets(): Promise<{ tickets: TicketDict[] }> {
    return this.request("/api/tickets");
  }

  setFailure(
    kind: string,
    index: number,
    mode: string,
    p?: number,
  ): Promise<DeviceRow> {
    const body: { mode: string; p?: number } = { mode };
    if (p !== undefined) {
      body.p = p;
    }
    return this.request(`/api/devices/${kind}/${index}/failure`, {
      method: "PUT",
      headers: JSON_HEADERS,
      body: JSON.stringify(body),
    });
  }

  step(seconds: number): Promise<StepResult> {
    return this.request("/api/sim/step", {
      method: "POST",
      headers: JSON_HEADERS,
      body: JSON.stringify({ seconds }),
    });
  }
}

export interface StreamHandlers {
  onRecord(record: EventRecord): void;
  onStatus?(connected: boolean): void;
}

/** The slice of EventSource the stream code touches, stubbable in tests. */
export interface EventSourceLike {
  addEventListener(type: string, listener: (ev: { data?: unknown }) => void): void;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamOptions {
  base?: string;
  sinceSeq?: number;
  factory?: EventSourceFactory;
}

/**
 * Open the server-sent event stream and feed parsed records to `handlers`.
 *
 * Returns a function that closes the stream.  `sinceSeq: -1` (the default)
 * replays the full run history before going live, which lets the caller
 * rebuild state from nothing.  Heartbeat events carry no record and are
 * ignored here; the browser's EventSource reconnects on its own.
 */
export function openEvents(
  handlers: StreamHandlers,
  options: StreamOptions = {},
): () => void {
  const factory: EventSourceFactory =
    options.factory ?? ((url) => new EventSource(url));
  const since = options.sinceSeq ?? -1;
  const source = factory(`${options.base ?? ""}/api/events?since_seq=${since}`);
  source.addEventListener("open", () => handlers.onStatus?.(true));
  source.addEventListener("error", () => handlers.onStatus?.(false));
  source.addEventListener("message", (ev) => {
    if (typeof ev.data !== "string") {
      return;
    }
    let record: EventRecord;
    try {
      record = JSON.parse(ev.data) as EventRecord;
    } catch {
      return;
    }
    handlers.onRecord(record);
  });
  return () => source.close();
}
