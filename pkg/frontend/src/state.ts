/**
 * View model and reducer for the operator console.
 *
 * Everything on screen derives from this model, and the model changes only
 * through reduce(): socket lifecycle, parsed server frames, sent commands,
 * and selection. The reducer never simulates; a command has no visible
 * effect until the server acknowledges it, and each ack/error resolves at
 * most one pending seq, so a duplicate or unsolicited reply is inert.
 */

import type { ServerMessage, Snapshot } from "./protocol.js";

export const FEED_LIMIT = 200;
export const STALL_MS = 2000;

export type ConnectionState = "connecting" | "open" | "closed";

export interface FeedEntry {
  at: number;
  tick: number | null;
  kind: "ack" | "error" | "swap" | "info";
  text: string;
}

export interface PendingCommand {
  type: string;
  payload: Record<string, unknown>;
  sentAt: number;
}

export interface ViewModel {
  connection: ConnectionState;
  protocol: number | null;
  commands: string[];
  snapshot: Snapshot | null;
  lastSnapshotAt: number | null;
  paused: boolean;
  timescale: number;
  selected: number | null;
  inspected: Record<string, unknown> | null;
  toast: { text: string; at: number } | null;
  feed: FeedEntry[];
  pending: Map<number, PendingCommand>;
}

export type UiEvent =
  | { kind: "socket"; state: ConnectionState; at: number }
  | { kind: "server"; message: ServerMessage; at: number }
  | {
      kind: "sent";
      seq: number;
      type: string;
      payload: Record<string, unknown>;
      at: number;
    }
  | { kind: "select"; id: number | null };

export function initialModel(): ViewModel {
  return {
    connection: "connecting",
    protocol: null,
    commands: [],
    snapshot: null,
    lastSnapshotAt: null,
    paused: false,
    timescale: 1,
    selected: null,
    inspected: null,
    toast: null,
    feed: [],
    pending: new Map(),
  };
}

/** Stale stream indicator: connected, not paused, no snapshot for 2 s. */
export function isStalled(model: ViewModel, now: number): boolean {
  return (
    model.connection === "open" &&
    !model.paused &&
    model.lastSnapshotAt !== null &&
    now - model.lastSnapshotAt > STALL_MS
  );
}

function pushFeed(feed: FeedEntry[], entries: FeedEntry[]): FeedEntry[] {
  // newest first; entries passed oldest-first so a batch reads downward
  const next = [...entries].reverse().concat(feed);
  return next.length > FEED_LIMIT ? next.slice(0, FEED_LIMIT) : next;
}

function summarizePayload(payload: Record<string, unknown>): string {
  const parts = Object.entries(payload).map(([k, v]) => `${k}=${JSON.stringify(v)}`);
  return parts.length === 0 ? "" : ` ${parts.join(" ")}`;
}

const PACING = new Set(["pause", "resume", "single_step", "set_timescale"]);

function applySnapshot(model: ViewModel, snap: Snapshot, at: number): ViewModel {
  return {
    ...model,
    snapshot: snap,
    lastSnapshotAt: at,
    paused: typeof snap.paused === "boolean" ? snap.paused : model.paused,
    timescale: typeof snap.timescale === "number" ? snap.timescale : model.timescale,
  };
}

function resolveReply(
  model: ViewModel,
  message: Extract<ServerMessage, { type: "ack" | "error" }>,
  at: number,
): ViewModel {
  const seq = message.seq;
  if (seq === null || !model.pending.has(seq)) {
    return model; // unsolicited or duplicate reply: exactly-one pairing
  }
  const sent = model.pending.get(seq)!;
  const pending = new Map(model.pending);
  pending.delete(seq);

  if (message.type === "error") {
    const text = `${sent.type} rejected: ${message.payload.error}`;
    return {
      ...model,
      pending,
      toast: { text, at },
      feed: pushFeed(model.feed, [
        { at, tick: model.snapshot?.tick ?? null, kind: "error", text },
      ]),
    };
  }

  const payload = message.payload;
  let next: ViewModel = { ...model, pending };
  const entries: FeedEntry[] = [];
  const snapTick = model.snapshot?.tick ?? null;

  if (PACING.has(sent.type)) {
    const tick = typeof payload.tick === "number" ? payload.tick : snapTick;
    if (typeof payload.paused === "boolean") {
      next = { ...next, paused: payload.paused };
    }
    if (typeof payload.timescale === "number") {
      next = { ...next, timescale: payload.timescale };
    }
    entries.push({ at, tick, kind: "ack", text: `${sent.type}${summarizePayload(sent.payload)}` });
  } else if (sent.type === "shower.program") {
    const program = String(sent.payload.program ?? "?");
    const targets = Array.isArray(payload.targets)
      ? payload.targets.filter((t): t is number => typeof t === "number")
      : [];
    if (targets.length === 0) {
      entries.push({ at, tick: snapTick, kind: "ack", text: `shower.program ${program}: no robots in cone` });
    }
    for (const id of targets) {
      entries.push({ at, tick: snapTick, kind: "swap", text: `robot ${id} ← ${program}` });
    }
  } else if (sent.type === "inspect") {
    next = { ...next, inspected: payload };
    entries.push({ at, tick: snapTick, kind: "ack", text: `inspect robot ${String(sent.payload.id)}` });
  } else {
    entries.push({ at, tick: snapTick, kind: "ack", text: `${sent.type}${summarizePayload(sent.payload)}` });
  }

  return { ...next, feed: pushFeed(next.feed, entries) };
}

export function reduce(model: ViewModel, event: UiEvent): ViewModel {
  switch (event.kind) {
    case "socket": {
      let next: ViewModel = { ...model, connection: event.state };
      if (event.state === "closed") {
        const unanswered = model.pending.size;
        next = { ...next, pending: new Map() };
        const text =
          unanswered > 0
            ? `connection closed (${unanswered} command${unanswered === 1 ? "" : "s"} unanswered)`
            : "connection closed";
        next = {
          ...next,
          feed: pushFeed(next.feed, [
            { at: event.at, tick: model.snapshot?.tick ?? null, kind: "info", text },
          ]),
        };
      }
      return next;
    }
    case "server": {
      const message = event.message;
      if (message.type === "hello") {
        const withSnap = applySnapshot(model, message.payload.snapshot, event.at);
        return {
          ...withSnap,
          protocol: message.payload.protocol,
          commands: message.payload.commands,
          feed: pushFeed(model.feed, [
            {
              at: event.at,
              tick: message.payload.snapshot.tick,
              kind: "info",
              text: `connected: protocol ${message.payload.protocol}`,
            },
          ]),
        };
      }
      if (message.type === "snapshot") {
        return applySnapshot(model, message.payload, event.at);
      }
      return resolveReply(model, message, event.at);
    }
    case "sent": {
      const pending = new Map(model.pending);
      pending.set(event.seq, {
        type: event.type,
        payload: event.payload,
        sentAt: event.at,
      });
      return { ...model, pending };
    }
    case "select":
      return { ...model, selected: event.id, inspected: null };
  }
}
