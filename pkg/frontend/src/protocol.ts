// Wire schema shared with the engine: every message is a JSON object with an
// envelope (type, topic, session_id, seq, timestamp_ms) plus a type-specific
// payload. Over WebSocket one message = one JSON text frame.

export const TOPICS = {
  commands: "kt.commands",
  sphere: "kt.sphere",
  telemetry: "kt.telemetry",
  scene: "kt.scene",
  playback: "kt.playback",
} as const;

export interface Envelope {
  type: string;
  topic: string;
  session_id: string;
  seq: number;
  timestamp_ms: number;
}

export interface TelemetryMsg extends Envelope {
  type: "telemetry";
  mode?: "idle" | "recording" | "replaying";
  gripper?: "open" | "closed";
  q?: number[];
  tip_position?: [number, number, number];
  link_positions?: [number, number, number][];
  sphere_position?: [number, number, number];
  recorded_states?: number;
  event?: string; // command_rejected, playback_finished
  kind?: string;
  reason?: string;
  stacked?: number | null;
  duration_s?: number;
}

export interface SceneCube {
  id: string;
  side: number;
  position: [number, number, number];
  support: string;
}

export interface SceneMsg extends Envelope {
  type: "scene";
  cubes: SceneCube[];
  attached: string | null;
  target_order: string[];
  target_base_xy: [number, number];
}

export type ServerMsg = TelemetryMsg | SceneMsg | Envelope;

export type CommandKind = "start" | "stop" | "open" | "close" | "replay";

export interface SpherePose {
  position: [number, number, number];
  orientation: [number, number, number, number]; // w, x, y, z
}

function envelope(type: string, topic: string): Envelope {
  // seq/timestamp below zero ask the engine to stamp them server-side
  return { type, topic, session_id: "ui", seq: -1, timestamp_ms: -1 };
}

export function subscribeMsg(topic: string, fromSeq = -1): object {
  return { ...envelope("subscribe", topic), from_seq: fromSeq };
}

export function commandMsg(kind: CommandKind): object {
  return { ...envelope("command", TOPICS.commands), kind };
}

export function sphereMsg(pose: SpherePose): object {
  return {
    ...envelope("sphere", TOPICS.sphere),
    position: pose.position,
    orientation: pose.orientation,
  };
}

export function parseServerMsg(raw: string): ServerMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const msg = obj as Record<string, unknown>;
  if (typeof msg.type !== "string" || typeof msg.topic !== "string") return null;
  return msg as unknown as ServerMsg;
}

export function isTelemetry(msg: ServerMsg): msg is TelemetryMsg {
  return msg.type === "telemetry" && msg.topic === TOPICS.telemetry;
}

export function isPlaybackEvent(msg: ServerMsg): msg is TelemetryMsg {
  return msg.type === "telemetry" && msg.topic === TOPICS.playback;
}

export function isScene(msg: ServerMsg): msg is SceneMsg {
  return msg.type === "scene";
}
