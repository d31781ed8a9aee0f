// The live state mirror: no client authority, ever.
//
// State advances only by adopting a welcome snapshot or applying commits in
// seq order; anything arriving early waits in a buffer. Proposals resolve
// FIFO: the server answers each of ours, in order, with a commit from us or
// a reject carrying our pid.

import { digest } from "./canonical.js";
import { applyCommitted, MirrorDivergence } from "./engine.js";
import {
  CommitMsg,
  EventJson,
  PROTOCOL_VERSION,
  ServerMsg,
  StateJson,
} from "./protocol.js";

export interface MirrorHooks {
  onChange?: (state: StateJson) => void;
  onReject?: (pid: number | null, reason: string) => void;
  onCommit?: (commit: CommitMsg) => void;
  onWelcome?: (snapshot: StateJson) => void;
}

export class SessionMirror {
  name: string;
  userId: string | null = null;
  state: StateJson | null = null;
  divergence: string | null = null;
  pending: number[] = [];
  private expected = 1;
  private buffer = new Map<number, CommitMsg>();
  private nextPid = 1;
  private hooks: MirrorHooks;

  constructor(name: string, hooks: MirrorHooks = {}) {
    this.name = name;
    this.hooks = hooks;
  }

  helloMessage(): string {
    return JSON.stringify({ t: "hello", v: PROTOCOL_VERSION, name: this.name });
  }

  resyncMessage(): string {
    return JSON.stringify({ t: "resync" });
  }

  propose(event: EventJson): { pid: number; message: string } {
    const pid = this.nextPid++;
    this.pending.push(pid);
    return { pid, message: JSON.stringify({ t: "propose", pid, event }) };
  }

  /** Feed one raw server message; returns replies to send (pongs). */
  handleMessage(raw: string): string[] {
    let msg: ServerMsg;
    try {
      msg = JSON.parse(raw) as ServerMsg;
    } catch {
      this.divergence = "unparseable server message";
      return [];
    }
    switch (msg.t) {
      case "welcome": {
        this.state = msg.snapshot;
        this.userId = msg.user;
        this.expected = msg.snapshot.last_seq + 1;
        for (const seq of [...this.buffer.keys()]) {
          if (seq < this.expected) this.buffer.delete(seq);
        }
        this.hooks.onWelcome?.(this.state);
        this.drain();
        return [];
      }
      case "commit": {
        if (msg.seq >= this.expected) {
          this.buffer.set(msg.seq, msg);
          this.drain();
        }
        return [];
      }
      case "reject": {
        const at = msg.pid === null ? -1 : this.pending.indexOf(msg.pid);
        if (at >= 0) this.pending.splice(at, 1);
        this.hooks.onReject?.(msg.pid, msg.reason);
        return [];
      }
      case "ping":
        return [JSON.stringify({ t: "pong" })];
      default:
        return [];
    }
  }

  gapPending(): boolean {
    return this.buffer.size > 0 && !this.buffer.has(this.expected);
  }

  private drain(): void {
    if (!this.state) return;
    while (this.buffer.has(this.expected)) {
      const commit = this.buffer.get(this.expected)!;
      this.buffer.delete(this.expected);
      try {
        applyCommitted(this.state, commit);
      } catch (err) {
        if (err instanceof MirrorDivergence) {
          this.divergence = err.message;
          return;
        }
        throw err;
      }
      this.expected = commit.seq + 1;
      if (commit.actor === this.userId && this.pending.length > 0) {
        this.pending.shift();
      }
      this.hooks.onCommit?.(commit);
      this.hooks.onChange?.(this.state);
    }
  }

  async hash(): Promise<string | null> {
    if (!this.state) return null;
    return digest(this.state);
  }
}
