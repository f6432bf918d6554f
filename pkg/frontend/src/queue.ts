/**
 * Outgoing reading-event queue. Reading is never blocked on telemetry:
 * gestures enqueue synchronously and the queue drains in the
 * background, surviving network outages.
 *
 * Guarantees:
 * - at most one event per gesture key, ever (repeat gestures on the
 *   same target and retries of the same POST reuse the key);
 * - FIFO delivery, one request in flight at a time;
 * - an event leaves the queue only after the server acknowledged it
 *   (a "duplicate-ignored" answer counts: the server already has it);
 * - concurrent flush() calls share a single drain, so an outage
 *   followed by several reconnect triggers cannot double-post;
 * - bounded size and bounded retries per event.
 */

import type { EventKind, OutgoingEvent } from "./api.js";

export type PostEvent = (event: OutgoingEvent) => Promise<unknown>;

export interface QueueOptions {
  /** Events held at most; enqueue refuses beyond this. */
  maxSize?: number;
  /** Failed delivery attempts before an event is dropped. */
  maxAttempts?: number;
}

/**
 * Identifies a gesture for dedup purposes: same paper, same kind, same
 * UTC day — the same window the server uses, so a retry that crosses a
 * flush boundary still maps to one stored event.
 */
export function gestureKey(kind: EventKind, paperId: string, at: Date): string {
  return `${kind}:${paperId}:${at.toISOString().slice(0, 10)}`;
}

interface PendingEvent {
  key: string;
  event: OutgoingEvent;
  attempts: number;
}

export class EventQueue {
  private readonly pending: PendingEvent[] = [];
  private readonly seen = new Set<string>();
  private draining: Promise<void> | null = null;
  private readonly maxSize: number;
  private readonly maxAttempts: number;

  constructor(
    private readonly post: PostEvent,
    options: QueueOptions = {},
  ) {
    this.maxSize = options.maxSize ?? 200;
    this.maxAttempts = options.maxAttempts ?? 25;
  }

  get size(): number {
    return this.pending.length;
  }

  /**
   * Accepts the event unless its gesture key was already accepted or
   * the queue is full. Returns whether the event was queued.
   */
  enqueue(key: string, event: OutgoingEvent): boolean {
    if (this.seen.has(key) || this.pending.length >= this.maxSize) return false;
    this.seen.add(key);
    this.pending.push({ key, event, attempts: 0 });
    return true;
  }

  /**
   * Drains the queue FIFO. Stops at the first delivery failure,
   * leaving that event and everything behind it queued for a later
   * flush. Never rejects. Concurrent calls await the same drain.
   */
  flush(): Promise<void> {
    if (this.draining === null) {
      this.draining = this.drain().finally(() => {
        this.draining = null;
      });
    }
    return this.draining;
  }

  private async drain(): Promise<void> {
    while (this.pending.length > 0) {
      const head = this.pending[0]!;
      try {
        await this.post(head.event);
      } catch {
        head.attempts += 1;
        if (head.attempts >= this.maxAttempts) this.pending.shift();
        return;
      }
      this.pending.shift();
    }
  }
}
