// Wire message and state shapes, matching the server's canonical JSON forms.

export interface PoseJson {
  position: [number, number, number];
  forward: [number, number, number];
  up: [number, number, number];
}

export type PlacementJson =
  | { kind: "stack"; stack_position: number }
  | { kind: "placed"; position: [number, number, number] };

export interface BitJson {
  bit_id: string;
  doc_id: string;
  span: [number, number];
  text: string;
  ordinal: number | null;
  owner: string;
  owner_history: [string, number][];
  status: string;
  placement: PlacementJson;
  status_changed_at: number;
  created_by: string;
}

export interface UserJson {
  name: string;
  color_index: number;
  badge: number;
  order: number;
  present: boolean;
  pose: PoseJson;
  stack: string[];
}

export interface DocumentJson {
  doc_id: string;
  title: string;
  body: string;
  cohesion: number[][] | null;
}

export interface StateJson {
  session_id: string;
  started_at: number;
  last_seq: number;
  document: DocumentJson | null;
  users: Record<string, UserJson>;
  bits: Record<string, BitJson>;
}

export interface EventJson {
  t: string;
  [key: string]: unknown;
}

export interface CommitMsg {
  t: "commit";
  seq: number;
  actor: string;
  ts: number;
  event: EventJson;
}

export interface WelcomeMsg {
  t: "welcome";
  v: number;
  user: string;
  seq: number;
  snapshot: StateJson;
}

export interface RejectMsg {
  t: "reject";
  pid: number | null;
  reason: string;
}

export type ServerMsg =
  | WelcomeMsg
  | CommitMsg
  | RejectMsg
  | { t: "pong" }
  | { t: "ping" };

export const PROTOCOL_VERSION = 1;

// Ownership palette, index = join order; mirrors the server default.
export const PALETTE: [number, number, number][] = [
  [255, 0, 0],
  [0, 255, 0],
  [0, 0, 255],
  [255, 165, 0],
  [128, 0, 128],
  [0, 128, 128],
];

export function colorCss(index: number): string {
  const [r, g, b] = PALETTE[index % PALETTE.length];
  return `rgb(${r},${g},${b})`;
}
