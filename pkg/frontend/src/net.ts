/**
 * WebSocket link to the control endpoint.
 *
 * Owns the seq counter and the reconnect loop; everything it learns is
 * surfaced as events for the reducer, so the socket layer holds no UI state.
 */

import { commandFrame, parseServerMessage, type ServerMessage } from "./protocol.js";
import type { ConnectionState } from "./state.js";

export type LinkEvent =
  | { kind: "socket"; state: ConnectionState; at: number }
  | { kind: "server"; message: ServerMessage; at: number }
  | {
      kind: "sent";
      seq: number;
      type: string;
      payload: Record<string, unknown>;
      at: number;
    }
  | { kind: "protocol-error"; reason: string; at: number };

const RECONNECT_MS = 1500;

export class ControlLink {
  private ws: WebSocket | null = null;
  private seqCounter = 0;
  private disposed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly onEvent: (event: LinkEvent) => void,
  ) {}

  connect(): void {
    if (this.disposed) {
      return;
    }
    this.onEvent({ kind: "socket", state: "connecting", at: Date.now() });
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.onEvent({ kind: "socket", state: "open", at: Date.now() });
    };
    ws.onmessage = (event: MessageEvent) => {
      try {
        const message = parseServerMessage(String(event.data));
        this.onEvent({ kind: "server", message, at: Date.now() });
      } catch (exc) {
        this.onEvent({ kind: "protocol-error", reason: String(exc), at: Date.now() });
      }
    };
    ws.onclose = () => {
      this.onEvent({ kind: "socket", state: "closed", at: Date.now() });
      this.ws = null;
      if (!this.disposed) {
        this.retryTimer = setTimeout(() => this.connect(), RECONNECT_MS);
      }
    };
  }

  /** Send one command; returns its seq, or null when the link is down. */
  send(type: string, payload: Record<string, unknown> = {}): number | null {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) {
      return null;
    }
    const seq = ++this.seqCounter;
    this.ws.send(commandFrame(seq, type, payload));
    this.onEvent({ kind: "sent", seq, type, payload, at: Date.now() });
    return seq;
  }

  dispose(): void {
    this.disposed = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
    }
    this.ws?.close();
  }
}
