// Wire protocol for the /teleop WebSocket: JSON text frames, one broadcast per
// control step from the server; targets and control commands from the client.

export interface BodyView {
  pos: [number, number];
  vel: [number, number];
  radius: number;
}

export interface GoalView {
  pos: [number, number];
  vel: [number, number] | null;
  radius: number;
}

export interface StateBroadcast {
  type: "state";
  tick: number;
  episode_id: number;
  task_id: string;
  paddle: BodyView;
  puck: BodyView;
  objects: BodyView[];
  goal: GoalView | null;
  reward: number;
  episode_return: number;
  recording: boolean;
  success: boolean;
  done: boolean;
}

export interface Hello {
  type: "hello";
  role: "controller" | "viewer";
  task_id: string;
  control_dt: number;
  bounds: { half_width: number; half_length: number; paddle_region_y_max: number };
  tasks: string[];
}

export interface Ack {
  type: "ack";
  ok: boolean;
  detail: string;
}

export type ServerMessage = StateBroadcast | Hello | Ack | { type: "role"; role: string };

export interface TargetCommand {
  type: "target";
  x: number;
  y: number;
}

export interface ControlCommand {
  type: "control";
  cmd: "reset" | "set_task" | "start_record" | "stop_record" | "set_seed";
  task_id?: string;
  seed?: number;
}

function isBody(b: unknown): b is BodyView {
  const v = b as BodyView;
  return (
    !!v
    && Array.isArray(v.pos) && v.pos.length === 2
    && Array.isArray(v.vel) && v.vel.length === 2
    && typeof v.radius === "number"
  );
}

/** Parse a server frame; returns null for anything malformed. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  const msg = doc as ServerMessage;
  if (!msg || typeof msg !== "object" || typeof (msg as { type?: unknown }).type !== "string") {
    return null;
  }
  if (msg.type === "state") {
    const s = msg as StateBroadcast;
    if (!isBody(s.paddle) || !isBody(s.puck) || !Array.isArray(s.objects)) return null;
    if (typeof s.tick !== "number" || typeof s.reward !== "number") return null;
    return s;
  }
  return msg;
}
