import { describe, expect, it } from "vitest";

import { TelemetryMsg } from "../src/protocol.js";
import {
  applyMessage,
  buttonStates,
  initialState,
  liveToasts,
  setConnection,
} from "../src/state.js";

function telemetry(overrides: Partial<TelemetryMsg> = {}): TelemetryMsg {
  return {
    type: "telemetry", topic: "kt.telemetry", session_id: "s", seq: 0,
    timestamp_ms: 0, mode: "idle", gripper: "open", q: [0, 0],
    recorded_states: 0, ...overrides,
  };
}

describe("snapshot application", () => {
  it("replaces the whole telemetry snapshot atomically", () => {
    let state = initialState();
    const t1 = telemetry({ seq: 1, mode: "recording", recorded_states: 3 });
    const t2 = telemetry({ seq: 2, mode: "recording", recorded_states: 4 });
    state = applyMessage(state, t1, 0);
    state = applyMessage(state, t2, 0);
    // the rendered snapshot is exactly t2: no field can come from t1
    expect(state.telemetry).toBe(t2);
  });

  it("command rejections become toasts, not snapshots", () => {
    let state = initialState();
    state = applyMessage(state, telemetry(), 0);
    const before = state.telemetry;
    state = applyMessage(state, telemetry({
      event: "command_rejected", kind: "stop", reason: "no demonstration",
      mode: undefined,
    }), 1000);
    expect(state.telemetry).toBe(before);
    expect(liveToasts(state, 1000)[0].text).toContain("stop");
  });

  it("toasts expire", () => {
    let state = initialState();
    state = applyMessage(state, telemetry({
      event: "command_rejected", kind: "start", reason: "x", mode: undefined,
    }), 0);
    expect(liveToasts(state, 100).length).toBe(1);
    expect(liveToasts(state, 10_000).length).toBe(0);
  });
});

describe("button enablement mirrors the session state machine", () => {
  function states(mode: "idle" | "recording" | "replaying") {
    let state = initialState();
    state = setConnection(state, "open", 0);
    state = applyMessage(state, telemetry({ mode }), 0);
    return buttonStates(state);
  }

  it("idle: start and replay enabled, stop disabled", () => {
    const b = states("idle");
    expect(b.start).toBe(true);
    expect(b.stop).toBe(false);
    expect(b.replay).toBe(true);
    expect(b.open).toBe(true);
  });

  it("recording: stop enabled, start and replay disabled", () => {
    const b = states("recording");
    expect(b.start).toBe(false);
    expect(b.stop).toBe(true);
    expect(b.replay).toBe(false);
  });

  it("replaying: everything but watching disabled", () => {
    const b = states("replaying");
    expect(b.start).toBe(false);
    expect(b.stop).toBe(false);
    expect(b.replay).toBe(false);
    expect(b.close).toBe(false);
  });

  it("disconnected: all disabled regardless of last mode", () => {
    let state = initialState();
    state = setConnection(state, "open", 0);
    state = applyMessage(state, telemetry({ mode: "idle" }), 0);
    state = setConnection(state, "closed", 1);
    const b = buttonStates(state);
    expect(Object.values(b).every((v) => v === false)).toBe(true);
  });
});
