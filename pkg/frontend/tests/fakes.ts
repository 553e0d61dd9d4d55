/** In-memory socket standing in for a WebSocket in unit tests. */

import type { SocketLike } from "../src/client.js";

type Listener = (event: { data?: unknown }) => void;

export class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  /** when set, every send is answered through this hook */
  autoReply: ((msg: Record<string, unknown>) => object | null) | null = null;
  private listeners = new Map<string, Listener[]>();

  send(data: string): void {
    this.sent.push(data);
    if (this.autoReply) {
      const reply = this.autoReply(JSON.parse(data));
      if (reply) {
        queueMicrotask(() => this.push(JSON.stringify(reply)));
      }
    }
  }

  close(): void {
    this.closed = true;
    this.emit("close", {});
  }

  addEventListener(type: string, listener: Listener): void {
    const bucket = this.listeners.get(type) ?? [];
    bucket.push(listener);
    this.listeners.set(type, bucket);
  }

  push(raw: string): void {
    this.emit("message", { data: raw });
  }

  emit(type: string, event: { data?: unknown }): void {
    for (const listener of this.listeners.get(type) ?? []) {
      listener(event);
    }
  }

  lastSent(): Record<string, unknown> {
    const raw = this.sent[this.sent.length - 1];
    if (raw === undefined) throw new Error("nothing sent");
    return JSON.parse(raw) as Record<string, unknown>;
  }
}

export function ackAll(msg: Record<string, unknown>): object {
  return { type: "ack", client_msg_id: msg.client_msg_id, tick: 1 };
}
