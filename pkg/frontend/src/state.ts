// Telemetry/scene snapshots for the render loop. Whole messages are swapped
// in atomically, so a rendered frame always reflects exactly one snapshot of
// each stream (no torn frames mixing two telemetry messages).

import { SceneMsg, ServerMsg, TelemetryMsg, isScene, isTelemetry } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface Toast {
  text: string;
  until: number; // ms epoch
  kind: "info" | "error";
}

export interface UiState {
  connection: Connection;
  telemetry: TelemetryMsg | null;
  scene: SceneMsg | null;
  toasts: Toast[];
}

export function initialState(): UiState {
  return { connection: "connecting", telemetry: null, scene: null, toasts: [] };
}

export function applyMessage(state: UiState, msg: ServerMsg, now: number): UiState {
  if (isTelemetry(msg)) {
    if (msg.event === "command_rejected") {
      return pushToast(state, `${msg.kind}: ${msg.reason ?? "rejected"}`, "error", now);
    }
    if (msg.mode !== undefined) {
      return { ...state, telemetry: msg };
    }
    return state;
  }
  if (isScene(msg)) {
    return { ...state, scene: msg };
  }
  if (msg.type === "telemetry" && (msg as TelemetryMsg).event === "playback_finished") {
    const t = msg as TelemetryMsg;
    const stacked = t.stacked === null || t.stacked === undefined ? "?" : t.stacked;
    return pushToast(state, `playback finished: ${stacked} cube(s) stacked`, "info", now);
  }
  return state;
}

export function setConnection(state: UiState, connection: Connection, now: number): UiState {
  if (connection === state.connection) return state;
  const next = { ...state, connection };
  if (connection === "closed") {
    return pushToast(next, "connection lost, retrying...", "error", now);
  }
  return next;
}

export function pushToast(state: UiState, text: string, kind: Toast["kind"],
                          now: number, ttlMs = 4000): UiState {
  const toasts = [...state.toasts, { text, kind, until: now + ttlMs }].slice(-5);
  return { ...state, toasts };
}

export function liveToasts(state: UiState, now: number): Toast[] {
  return state.toasts.filter((t) => t.until > now);
}

// Button enablement mirrors the session state machine.
export interface ButtonStates {
  start: boolean;
  stop: boolean;
  open: boolean;
  close: boolean;
  replay: boolean;
}

export function buttonStates(state: UiState): ButtonStates {
  const mode = state.telemetry?.mode;
  const connected = state.connection === "open" && mode !== undefined;
  return {
    start: connected && mode === "idle",
    stop: connected && mode === "recording",
    open: connected && mode !== "replaying",
    close: connected && mode !== "replaying",
    replay: connected && mode === "idle",
  };
}
