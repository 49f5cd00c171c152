/** Wire types shared between the API layer and the view model.
 *
 * These mirror the JSON shapes served by the operator service; field
 * names stay snake_case so payloads can be used without translation.
 */

export interface EventRecord {
  seq: number;
  ts: number;
  kind: string;
  src: string;
  dst: string;
  payload: Record<string, unknown>;
}

export interface FailureInfo {
  mode: string;
  p?: number;
}

export interface DeviceRow {
  kind: string;
  index: number;
  relay_on: boolean;
  failure: FailureInfo;
  effective_on: boolean;
}

export interface TicketDict {
  id: string;
  utterance: string;
  wire: string;
  device: string;
  index: number;
  action: string;
  state: string;
  attempts: number;
  submitted_at: number;
  resolved_at: number | null;
}

export interface ChannelConfig {
  base_delay_s: number;
  jitter_s: number;
  loss_prob: number;
  dup_prob: number;
  reorder_window_s: number;
}

export interface DevicesPayload {
  devices: DeviceRow[];
  supply_on: boolean;
}

export interface StateSnapshot {
  now: number;
  phase: string;
  supply_on: boolean;
  devices: DeviceRow[];
  tickets: TicketDict[];
  sms: ChannelConfig;
  run_mode: string;
  seed: number;
  log_path: string | null;
}

export interface StepResult {
  processed: number;
  now: number;
}
