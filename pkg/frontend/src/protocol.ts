/** Wire types for the scenesim control service.
 *
 * Mirrors docs/protocol.md in the engine repo. Parameter ranges and scene
 * scoping are NOT duplicated here; they arrive at runtime via the served
 * schema (see schema.ts).
 */

export type SceneName = string;

export interface IntField {
  kind: "int";
  min: number;
  max: number;
  scenes: SceneName[];
}

export interface BoolField {
  kind: "bool";
  scenes: SceneName[];
}

export interface ChoiceField {
  kind: "choice";
  choices_by_scene: Record<SceneName, string[]>;
  scenes: SceneName[];
}

export interface MaskField {
  kind: "mask";
  min: number;
  max: number;
  scenes: SceneName[];
}

export type FieldSchema = IntField | BoolField | ChoiceField | MaskField;

export interface ControlSchema {
  scenes: SceneName[];
  fields: Record<string, FieldSchema>;
  protocol: {
    tick_rate: number;
    default_snapshot_rate: number;
    message_types: string[];
  };
}

export interface AckFrame {
  type: "ack";
  client_msg_id: number | string | null;
  tick: number | null;
  [extra: string]: unknown;
}

export interface ErrorFrame {
  type: "error";
  client_msg_id: number | string | null;
  code: string;
  message: string;
}

export interface SnapshotFrame {
  type: "snapshot";
  tick: number;
  running: boolean;
  events: EngineEvent[];
  state: SnapshotState;
}

export interface EngineEvent {
  tick: number;
  kind: "event";
  event: string;
  [extra: string]: unknown;
}

export interface SnapshotState {
  tick: number;
  sim_time: number;
  scene: SceneName;
  player: { x: number; y: number; z: number; yaw: number; pitch: number };
  params: Record<string, unknown>;
  /** [id, x, y, heading, speed_level, waiting] per agent */
  agents: [number, number, number, number, number, number][];
  /** [machine, x, y, z] per ball in flight */
  balls: [number, number, number, number][];
  /** [rail, head_s] per active train */
  trains: [number, number][];
  plane: [number, number, number] | null;
  cars: [number, number][];
  /** [id, azimuth, elevation, distance, gain] per active cue */
  cues: [string, number, number, number, number][];
  ambiance: [string, number, number];
  metrics: Record<string, unknown>;
}

export type ServerFrame = AckFrame | ErrorFrame | SnapshotFrame;

export type Reply = AckFrame | ErrorFrame;

export function parseFrame(raw: string): ServerFrame {
  const frame = JSON.parse(raw) as ServerFrame;
  if (
    frame === null ||
    typeof frame !== "object" ||
    !["ack", "error", "snapshot"].includes(frame.type)
  ) {
    throw new Error(`unrecognized server frame: ${raw.slice(0, 80)}`);
  }
  return frame;
}

export function isReply(frame: ServerFrame): frame is Reply {
  return frame.type === "ack" || frame.type === "error";
}
