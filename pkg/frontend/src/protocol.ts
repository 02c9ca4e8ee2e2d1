/**
 * Wire contract for the pogoswarm control endpoint.
 *
 * Every frame on the socket is one JSON object. The server sends "hello"
 * once on connect, then interleaves "snapshot" frames (latest world state,
 * coalesced when the client lags) with "ack"/"error" replies that echo the
 * seq of the command they answer. The client sends {type, seq, payload}.
 */

export interface RobotView {
  id: number;
  x: number;
  y: number;
  theta: number;
  radius: number;
  program: string;
  halted: boolean;
  head_led: number[];
  belly: number[][];
  duties: number[];
}

export interface ObjectView {
  id: number;
  object_id: number;
  x: number;
  y: number;
  radius: number;
  movable: boolean;
}

export interface WallView {
  id: number;
  wall_id: number;
  p1: number[];
  p2: number[];
}

export interface ShowerView {
  id: number;
  x: number;
  y: number;
  theta: number;
  cone_half_angle: number;
  range: number;
}

export interface LightView {
  x: number;
  y: number;
  power: number;
  kind: string;
}

export interface ChannelStats {
  delivered: number;
  dropped: number;
  transmitted: number;
}

export interface Snapshot {
  tick: number;
  time_s: number;
  arena: number[][];
  robots: RobotView[];
  objects: ObjectView[];
  walls: WallView[];
  shower: ShowerView | null;
  lights: LightView[];
  in_flight: number;
  stats: ChannelStats;
  paused?: boolean;
  timescale?: number;
}

export interface HelloPayload {
  protocol: number;
  commands: string[];
  snapshot: Snapshot;
}

export type ServerMessage =
  | { type: "hello"; payload: HelloPayload }
  | { type: "snapshot"; payload: Snapshot }
  | { type: "ack"; seq: number | null; payload: Record<string, unknown> }
  | { type: "error"; seq: number | null; payload: { error: string } };

export class ProtocolError extends Error {}

function isObject(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function asSnapshot(value: unknown, where: string): Snapshot {
  if (!isObject(value)) {
    throw new ProtocolError(`${where}: snapshot must be an object`);
  }
  if (typeof value.tick !== "number") {
    throw new ProtocolError(`${where}: snapshot needs a numeric tick`);
  }
  if (!Array.isArray(value.robots)) {
    throw new ProtocolError(`${where}: snapshot needs a robots array`);
  }
  return value as unknown as Snapshot;
}

function asSeq(value: unknown): number | null {
  if (value === null || value === undefined) {
    return null;
  }
  if (typeof value !== "number") {
    throw new ProtocolError("reply seq must be a number or null");
  }
  return value;
}

/** Parse and shape-check one server frame; throws ProtocolError on junk. */
export function parseServerMessage(text: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (exc) {
    throw new ProtocolError(`frame is not valid JSON: ${String(exc)}`);
  }
  if (!isObject(raw)) {
    throw new ProtocolError("frame must be a JSON object");
  }
  const type = raw.type;
  if (type === "hello") {
    const payload = raw.payload;
    if (!isObject(payload) || typeof payload.protocol !== "number") {
      throw new ProtocolError("hello needs a numeric payload.protocol");
    }
    const commands = payload.commands;
    if (!Array.isArray(commands) || commands.some((c) => typeof c !== "string")) {
      throw new ProtocolError("hello needs payload.commands: string[]");
    }
    return {
      type: "hello",
      payload: {
        protocol: payload.protocol,
        commands: commands as string[],
        snapshot: asSnapshot(payload.snapshot, "hello"),
      },
    };
  }
  if (type === "snapshot") {
    return { type: "snapshot", payload: asSnapshot(raw.payload, "snapshot") };
  }
  if (type === "ack") {
    if (!isObject(raw.payload)) {
      throw new ProtocolError("ack needs an object payload");
    }
    return { type: "ack", seq: asSeq(raw.seq), payload: raw.payload };
  }
  if (type === "error") {
    const payload = raw.payload;
    if (!isObject(payload) || typeof payload.error !== "string") {
      throw new ProtocolError("error reply needs payload.error: string");
    }
    return { type: "error", seq: asSeq(raw.seq), payload: { error: payload.error } };
  }
  throw new ProtocolError(`unknown server frame type ${JSON.stringify(type)}`);
}

/** Serialize one operator command in the envelope the server expects. */
export function commandFrame(
  seq: number,
  type: string,
  payload: Record<string, unknown>,
): string {
  return JSON.stringify({ type, seq, payload });
}
