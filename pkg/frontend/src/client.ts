/** Request/reply WebSocket client for the control service.
 *
 * Every outbound message carries a client_msg_id; the server answers each
 * frame with exactly one ack or error echoing it, which resolves the
 * matching promise here. Snapshots flow to a listener instead.
 */

import {
  isReply,
  parseFrame,
  type Reply,
  type SnapshotFrame,
} from "./protocol.js";

/** The subset of WebSocket the client needs; lets tests inject a fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(
    type: "message" | "close" | "open" | "error",
    listener: (event: { data?: unknown }) => void,
  ): void;
}

interface Pending {
  resolve: (reply: Reply) => void;
  reject: (err: Error) => void;
  timer: ReturnType<typeof setTimeout>;
}

export class ConsoleClient {
  private nextId = 1;
  private pending = new Map<number, Pending>();
  onSnapshot: ((frame: SnapshotFrame) => void) | null = null;
  onClose: (() => void) | null = null;

  constructor(
    private socket: SocketLike,
    private timeoutMs = 5000,
  ) {
    socket.addEventListener("message", (event) => {
      this.handleRaw(String(event.data));
    });
    socket.addEventListener("close", () => {
      this.failAll(new Error("connection closed"));
      this.onClose?.();
    });
  }

  /** Send one message; resolves with the server's ack or error frame. */
  request(msg: Record<string, unknown>): Promise<Reply> {
    const id = this.nextId;
    this.nextId += 1;
    return new Promise<Reply>((resolve, reject) => {
      const timer = setTimeout(() => {
        this.pending.delete(id);
        reject(new Error(`no reply to ${String(msg.type)} within ${this.timeoutMs} ms`));
      }, this.timeoutMs);
      this.pending.set(id, { resolve, reject, timer });
      this.socket.send(JSON.stringify({ ...msg, client_msg_id: id }));
    });
  }

  close(): void {
    this.socket.close();
  }

  private handleRaw(raw: string): void {
    let frame;
    try {
      frame = parseFrame(raw);
    } catch {
      return; // not ours to crash on; the feed shows only valid frames
    }
    if (!isReply(frame)) {
      this.onSnapshot?.(frame);
      return;
    }
    const id = frame.client_msg_id;
    if (typeof id !== "number") {
      return; // transport-level errors carry a null id
    }
    const waiter = this.pending.get(id);
    if (waiter) {
      this.pending.delete(id);
      clearTimeout(waiter.timer);
      waiter.resolve(frame);
    }
  }

  private failAll(err: Error): void {
    for (const waiter of this.pending.values()) {
      clearTimeout(waiter.timer);
      waiter.reject(err);
    }
    this.pending.clear();
  }
}
