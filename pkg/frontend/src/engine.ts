// Commit application: the deterministic core the server runs, ported so the
// dashboard can mirror state locally from the event stream alone.
//
// Only committed (already validated) events pass through here, so checks are
// safety nets that flag mirror divergence rather than a validation layer.
// None of this does floating-point arithmetic: positions and poses are
// stored exactly as parsed from the wire, which is what keeps local digests
// byte-identical to the server's.

import {
  BitJson,
  CommitMsg,
  EventJson,
  PALETTE,
  PoseJson,
  StateJson,
  UserJson,
} from "./protocol.js";

export class MirrorDivergence extends Error {}

export const DEFAULT_POSE: PoseJson = {
  position: [0, 0, 0],
  forward: [0, 0, 1],
  up: [0, 1, 0],
};

export function emptyState(sessionId = "default"): StateJson {
  return {
    session_id: sessionId,
    started_at: 0,
    last_seq: 0,
    document: null,
    users: {},
    bits: {},
  };
}

// --- numbered-step parsing over UTF-8 bytes --------------------------------

export interface Segment {
  ordinal: number;
  span: [number, number];
  text: string;
}

const WS_AFTER_SEP = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0c, 0x0b]);

export function parseSteps(body: string): Segment[] {
  const raw = new TextEncoder().encode(body);
  const headers: { lineStart: number; digitStart: number; ordinal: number }[] = [];
  let lineStart = 0;
  while (lineStart <= raw.length - 1) {
    let i = lineStart;
    while (i < raw.length && (raw[i] === 0x20 || raw[i] === 0x09)) i++;
    const digitStart = i;
    while (i < raw.length && raw[i] >= 0x30 && raw[i] <= 0x39) i++;
    if (
      i > digitStart &&
      i < raw.length &&
      (raw[i] === 0x2e || raw[i] === 0x29) && // '.' or ')'
      i + 1 < raw.length &&
      WS_AFTER_SEP.has(raw[i + 1])
    ) {
      const digits = new TextDecoder().decode(raw.subarray(digitStart, i));
      headers.push({ lineStart, digitStart, ordinal: parseInt(digits, 10) });
    }
    const nl = raw.indexOf(0x0a, lineStart);
    if (nl < 0) break;
    lineStart = nl + 1;
  }
  if (headers.length === 0) {
    throw new MirrorDivergence("fragment_steps committed on a headerless document");
  }
  const decoder = new TextDecoder();
  const segments: Segment[] = [];
  for (let h = 0; h < headers.length; h++) {
    const { digitStart, ordinal } = headers[h];
    let end = h + 1 < headers.length ? headers[h + 1].lineStart : raw.length;
    while (end > digitStart && (raw[end - 1] === 0x0a || raw[end - 1] === 0x0d)) end--;
    segments.push({
      ordinal,
      span: [digitStart, end],
      text: decoder.decode(raw.subarray(digitStart, end)),
    });
  }
  return segments;
}

// --- balanced contiguous split ---------------------------------------------

function minRuns(sizes: number[], cap: number): number {
  let runs = 1;
  let load = 0;
  for (const s of sizes) {
    if (load + s > cap) {
      runs += 1;
      load = s;
    } else {
      load += s;
    }
  }
  return runs;
}

export function assignSplit(
  ordinals: number[],
  cohesion: number[][] | null,
  users: string[],
): Map<string, number[]> {
  let groups: number[][];
  if (cohesion === null) {
    groups = ordinals.map((o) => [o]);
  } else {
    const covered = new Set<number>();
    groups = cohesion.map((g) => {
      g.forEach((o) => covered.add(o));
      return [...g];
    });
    for (const o of ordinals) if (!covered.has(o)) groups.push([o]);
    groups.sort((a, b) => a[0] - b[0]);
  }
  const k = users.length;
  if (k > groups.length) {
    throw new MirrorDivergence("committed split with more users than groups");
  }
  const sizes = groups.map((g) => g.length);

  let lo = Math.max(...sizes);
  let hi = sizes.reduce((a, b) => a + b, 0);
  while (lo < hi) {
    const mid = (lo + hi) >> 1;
    if (minRuns(sizes, mid) <= k) hi = mid;
    else lo = mid + 1;
  }
  const cap = lo;

  const bounds: number[] = [];
  let start = 0;
  for (let remaining = k - 1; remaining > 0; remaining--) {
    let load = 0;
    let cut = start;
    for (;;) {
      load += sizes[cut];
      cut += 1;
      const tail = sizes.slice(cut);
      if (load <= cap && tail.length >= remaining && minRuns(tail, cap) <= remaining) {
        break;
      }
    }
    bounds.push(cut);
    start = cut;
  }
  bounds.push(groups.length);

  const result = new Map<string, number[]>();
  start = 0;
  users.forEach((user, i) => {
    result.set(user, groups.slice(start, bounds[i]).flat());
    start = bounds[i];
  });
  return result;
}

// --- commit application ------------------------------------------------------

function presentInJoinOrder(state: StateJson): string[] {
  return Object.entries(state.users)
    .filter(([, u]) => u.present)
    .sort((a, b) => a[1].order - b[1].order)
    .map(([uid]) => uid);
}

function renumber(stack: string[], bits: Record<string, BitJson>): void {
  stack.forEach((bid, i) => {
    bits[bid].placement = { kind: "stack", stack_position: i };
  });
}

function popFromStack(state: StateJson, bit: BitJson): void {
  const holder = state.users[bit.owner];
  if (!holder) return;
  const at = holder.stack.indexOf(bit.bit_id);
  if (at < 0) return;
  holder.stack.splice(at, 1);
  renumber(holder.stack, state.bits);
}

function requireBit(state: StateJson, bitId: unknown): BitJson {
  const bit = state.bits[String(bitId)];
  if (!bit) throw new MirrorDivergence(`commit touches unknown bit ${bitId}`);
  return bit;
}

function makeBit(
  state: StateJson,
  owner: string,
  seg: { ordinal: number | null; span: [number, number]; text: string },
  seq: number,
  ts: number,
  createdBy: string,
): string {
  const bid = `b${Object.keys(state.bits).length + 1}`;
  const holder = state.users[owner];
  state.bits[bid] = {
    bit_id: bid,
    doc_id: state.document!.doc_id,
    span: seg.span,
    text: seg.text,
    ordinal: seg.ordinal,
    owner,
    owner_history: [[owner, seq]],
    status: "not_attempted",
    placement: { kind: "stack", stack_position: holder.stack.length },
    status_changed_at: ts,
    created_by: createdBy,
  };
  holder.stack.push(bid);
  return bid;
}

/** Apply one committed event in place; throws MirrorDivergence on nonsense. */
export function applyCommitted(state: StateJson, commit: CommitMsg): void {
  if (commit.seq !== state.last_seq + 1) {
    throw new MirrorDivergence(
      `commit seq ${commit.seq} applied to state at ${state.last_seq}`,
    );
  }
  const { actor, ts, seq, event } = commit;
  dispatch(state, actor, event, seq, ts);
  state.last_seq = seq;
}

function dispatch(
  state: StateJson,
  actor: string,
  event: EventJson,
  seq: number,
  ts: number,
): void {
  switch (event.t) {
    case "join": {
      const existing = state.users[actor];
      if (existing) {
        existing.present = true;
        existing.name = String(event.name);
        return;
      }
      const order = Object.keys(state.users).length;
      const user: UserJson = {
        name: String(event.name),
        color_index: order % PALETTE.length,
        badge: Math.floor(order / PALETTE.length),
        order,
        present: true,
        pose: structuredClone(DEFAULT_POSE),
        stack: [],
      };
      state.users[actor] = user;
      return;
    }
    case "leave": {
      state.users[actor].present = false;
      return;
    }
    case "load_document": {
      const doc = event.doc as StateJson["document"];
      state.document = structuredClone(doc);
      return;
    }
    case "fragment_steps": {
      const doc = state.document;
      if (!doc) throw new MirrorDivergence("fragment_steps without document");
      const segments = parseSteps(doc.body);
      const participants = presentInJoinOrder(state);
      const split = assignSplit(
        segments.map((s) => s.ordinal),
        doc.cohesion,
        participants,
      );
      const byOrdinal = new Map(segments.map((s) => [s.ordinal, s]));
      for (const uid of participants) {
        for (const ordinal of split.get(uid)!) {
          makeBit(state, uid, byOrdinal.get(ordinal)!, seq, ts, actor);
        }
      }
      return;
    }
    case "fragment_highlight": {
      const doc = state.document;
      if (!doc) throw new MirrorDivergence("fragment_highlight without document");
      const raw = new TextEncoder().encode(doc.body);
      const [s0, s1] = event.span as [number, number];
      let start = s0;
      let end = s1;
      while (start < end && WS_AFTER_SEP.has(raw[start])) start++;
      while (end > start && WS_AFTER_SEP.has(raw[end - 1])) end--;
      const text = new TextDecoder().decode(raw.subarray(start, end));
      makeBit(state, actor, { ordinal: null, span: [start, end], text }, seq, ts, actor);
      return;
    }
    case "claim": {
      const bit = requireBit(state, event.bit_id);
      popFromStack(state, bit);
      const claimant = state.users[actor];
      bit.owner = actor;
      bit.owner_history.push([actor, seq]);
      bit.placement = { kind: "stack", stack_position: claimant.stack.length };
      claimant.stack.push(bit.bit_id);
      return;
    }
    case "place": {
      const bit = requireBit(state, event.bit_id);
      popFromStack(state, bit);
      bit.placement = {
        kind: "placed",
        position: event.position as [number, number, number],
      };
      return;
    }
    case "return_to_stack": {
      const bit = requireBit(state, event.bit_id);
      const holder = state.users[actor];
      bit.placement = { kind: "stack", stack_position: holder.stack.length };
      holder.stack.push(bit.bit_id);
      return;
    }
    case "set_status": {
      const bit = requireBit(state, event.bit_id);
      bit.status = String(event.status);
      bit.status_changed_at = ts;
      return;
    }
    case "move_pose": {
      state.users[actor].pose = structuredClone(event.pose) as PoseJson;
      return;
    }
    case "reorder_stack": {
      const holder = state.users[actor];
      holder.stack = [...(event.order as string[])];
      renumber(holder.stack, state.bits);
      return;
    }
    default:
      throw new MirrorDivergence(`unknown committed event ${event.t}`);
  }
}
