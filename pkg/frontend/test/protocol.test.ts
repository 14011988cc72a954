import { describe, expect, it } from "vitest";

import {
  commandMsg,
  isScene,
  isTelemetry,
  parseServerMsg,
  sphereMsg,
  subscribeMsg,
  TOPICS,
} from "../src/protocol.js";

describe("outgoing messages", () => {
  it("commands carry the envelope and kind", () => {
    const msg = commandMsg("start") as Record<string, unknown>;
    expect(msg.type).toBe("command");
    expect(msg.topic).toBe(TOPICS.commands);
    expect(msg.kind).toBe("start");
    expect(msg.seq).toBe(-1); // server stamps
    expect(msg.timestamp_ms).toBe(-1);
  });

  it("sphere messages carry position and orientation", () => {
    const msg = sphereMsg({ position: [0.4, 0, 0.2], orientation: [1, 0, 0, 0] }) as
      Record<string, unknown>;
    expect(msg.type).toBe("sphere");
    expect(msg.position).toEqual([0.4, 0, 0.2]);
    expect(msg.orientation).toEqual([1, 0, 0, 0]);
  });

  it("subscriptions default to live tail", () => {
    const msg = subscribeMsg(TOPICS.telemetry) as Record<string, unknown>;
    expect(msg.from_seq).toBe(-1);
  });
});

describe("incoming messages", () => {
  const telemetry = JSON.stringify({
    type: "telemetry", topic: "kt.telemetry", session_id: "s", seq: 1,
    timestamp_ms: 50, mode: "recording", gripper: "open", q: [0, 0],
    link_positions: [[0, 0, 0], [0, 0, 1]],
  });

  it("parses telemetry", () => {
    const msg = parseServerMsg(telemetry)!;
    expect(isTelemetry(msg)).toBe(true);
    expect(isScene(msg)).toBe(false);
  });

  it("parses scene snapshots", () => {
    const msg = parseServerMsg(JSON.stringify({
      type: "scene", topic: "kt.scene", session_id: "s", seq: 0, timestamp_ms: 0,
      cubes: [], attached: null, target_order: [], target_base_xy: [0.4, 0],
    }))!;
    expect(isScene(msg)).toBe(true);
  });

  it("rejects garbage without throwing", () => {
    expect(parseServerMsg("{nope")).toBeNull();
    expect(parseServerMsg("42")).toBeNull();
    expect(parseServerMsg(JSON.stringify({ no: "type" }))).toBeNull();
  });
});
