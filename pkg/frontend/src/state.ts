/** Console-side session state.
 *
 * Parameter edits apply optimistically: the control shows the new value
 * immediately, and if the server answers with an error the entry rolls
 * back to the last confirmed value. Confirmed values come only from
 * snapshots, the single source of truth.
 */

import type { EngineEvent, SnapshotFrame } from "./protocol.js";

export const FEED_CAPACITY = 200;
export const STALE_AFTER_MS = 1000;

interface PendingEdit {
  value: unknown;
  editId: number;
}

export interface FeedEntry {
  tick: number;
  text: string;
}

export class ConsoleState {
  private confirmed: Record<string, unknown> = {};
  private pendingEdits = new Map<string, PendingEdit>();
  private nextEditId = 1;
  private feed: FeedEntry[] = [];
  private exportLines: string[] = [];
  lastSnapshot: SnapshotFrame | null = null;
  lastSnapshotAtMs: number | null = null;

  /** Displayed value: optimistic edit if one is in flight, else confirmed. */
  paramValue(name: string): unknown {
    const edit = this.pendingEdits.get(name);
    return edit !== undefined ? edit.value : this.confirmed[name];
  }

  params(): Record<string, unknown> {
    const merged = { ...this.confirmed };
    for (const [name, edit] of this.pendingEdits) {
      merged[name] = edit.value;
    }
    return merged;
  }

  /** Stage an edit; returns a token to confirm or roll back with. */
  stageEdit(name: string, value: unknown): number {
    const editId = this.nextEditId;
    this.nextEditId += 1;
    this.pendingEdits.set(name, { value, editId });
    return editId;
  }

  /** Server acked: keep the optimistic value until a snapshot confirms. */
  confirmEdit(name: string, editId: number): void {
    const edit = this.pendingEdits.get(name);
    if (edit && edit.editId === editId) {
      this.confirmed[name] = edit.value;
      this.pendingEdits.delete(name);
    }
  }

  /** Server rejected: drop the edit so the control snaps back. */
  rollbackEdit(name: string, editId: number): void {
    const edit = this.pendingEdits.get(name);
    if (edit && edit.editId === editId) {
      this.pendingEdits.delete(name);
    }
  }

  applySnapshot(frame: SnapshotFrame, nowMs: number): void {
    this.lastSnapshot = frame;
    this.lastSnapshotAtMs = nowMs;
    this.confirmed = { ...frame.state.params };
    for (const event of frame.events) {
      this.pushFeed({ tick: event.tick, text: describeEvent(event) });
      this.exportLines.push(JSON.stringify(event));
    }
  }

  isStale(nowMs: number): boolean {
    return (
      this.lastSnapshotAtMs === null ||
      nowMs - this.lastSnapshotAtMs > STALE_AFTER_MS
    );
  }

  pushFeed(entry: FeedEntry): void {
    this.feed.push(entry);
    if (this.feed.length > FEED_CAPACITY) {
      this.feed.splice(0, this.feed.length - FEED_CAPACITY);
    }
  }

  feedEntries(): readonly FeedEntry[] {
    return this.feed;
  }

  /** JSONL of every event seen this session, for download. */
  exportLog(): string {
    return this.exportLines.join("\n") + (this.exportLines.length ? "\n" : "");
  }
}

export function describeEvent(event: EngineEvent): string {
  const extras = Object.entries(event)
    .filter(([k]) => !["tick", "kind", "event"].includes(k))
    .map(([k, v]) => `${k}=${JSON.stringify(v)}`)
    .join(" ");
  return extras ? `${event.event} ${extras}` : event.event;
}
