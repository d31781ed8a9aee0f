// Browser dashboard: join a session, work your stack, watch everyone else.
//
// Left side: one lane per user (their color, progress bar, stacked and
// placed bit cards with claim/status/place controls). Right side: the
// instructor birds-eye panel, a top-down map of placed bits plus a
// blocked-bit alert list. All mutation goes propose -> commit; the UI only
// re-renders from mirrored state.

import { SessionMirror } from "./mirror.js";
import { BitJson, colorCss, EventJson, StateJson } from "./protocol.js";

interface RenderConfig {
  mapBoundsM: number;       // half-extent of the top-down map, meters
  fontSizeDmm: number;      // text size in distance-independent millimeters
  viewingDistanceM: number; // dmm -> px assumes this viewing distance
  pxPerMm: number;          // display density (96 dpi ~ 3.78 px/mm)
}

const RENDER: RenderConfig = {
  mapBoundsM: 6,
  fontSizeDmm: 17.87,
  viewingDistanceM: 1.0, // raise to shrink text for close-up desktop use
  pxPerMm: 3.78,
};

function dmmToPx(cfg: RenderConfig): number {
  return (cfg.fontSizeDmm * cfg.pxPerMm) / cfg.viewingDistanceM;
}

const $ = (id: string) => document.getElementById(id)!;

let socket: WebSocket | null = null;
let joined = false;
let placeTarget: string | null = null;
const busy = new Map<number, string>(); // pid -> bit_id awaiting commit/reject

const mirror = new SessionMirror("", {
  onChange: () => render(),
  onWelcome: () => render(),
  onReject: (pid, reason) => {
    if (pid !== null) busy.delete(pid);
    toast(`rejected: ${reason}`);
    render();
  },
  onCommit: (commit) => {
    for (const [pid, bid] of busy) {
      if (commit.actor === mirror.userId && bid === String(commit.event.bit_id ?? "")) {
        busy.delete(pid);
        break;
      }
    }
  },
});

function send(raw: string): void {
  if (socket && socket.readyState === WebSocket.OPEN) socket.send(raw);
}

function propose(event: EventJson, bitId?: string): void {
  const { pid, message } = mirror.propose(event);
  if (bitId) busy.set(pid, bitId);
  send(message);
}

function connect(): void {
  const url = `ws://${location.host}/ws`;
  socket = new WebSocket(url);
  socket.onopen = () => {
    banner("");
    send(mirror.helloMessage());
    if (joined) send(mirror.resyncMessage());
  };
  socket.onmessage = (ev) => {
    for (const reply of mirror.handleMessage(String(ev.data))) send(reply);
    if (mirror.gapPending()) send(mirror.resyncMessage());
    if (mirror.divergence) banner(`mirror divergence: ${mirror.divergence}`);
  };
  socket.onclose = () => {
    banner("connection lost, retrying...");
    setTimeout(connect, 2000);
  };
}

function banner(text: string): void {
  const el = $("banner");
  el.textContent = text;
  el.style.display = text ? "block" : "none";
}

function toast(text: string): void {
  const el = document.createElement("div");
  el.className = "toast";
  el.textContent = text;
  $("toasts").appendChild(el);
  setTimeout(() => el.remove(), 4000);
}

// --- rendering ---------------------------------------------------------------

function bitBusy(bid: string): boolean {
  return [...busy.values()].includes(bid);
}

function statusDot(status: string): string {
  return { not_attempted: "", in_progress: "amber", blocked: "red", completed: "green" }[
    status
  ] ?? "";
}

function bitCard(state: StateJson, bit: BitJson): HTMLElement {
  const card = document.createElement("div");
  card.className = `bit ${bit.status}`;
  card.style.borderColor = colorCss(state.users[bit.owner]?.color_index ?? 0);
  card.style.fontSize = `${dmmToPx(RENDER)}px`;

  const dot = document.createElement("span");
  dot.className = `dot ${statusDot(bit.status)}`;
  card.appendChild(dot);

  const text = document.createElement("span");
  text.className = "bit-text";
  text.textContent = bit.text;
  card.appendChild(text);

  const mine = bit.owner === mirror.userId;
  const done = bit.status === "completed";
  const disabled = bitBusy(bit.bit_id);

  if (!mine && joined) {
    const claim = document.createElement("button");
    claim.textContent = "claim";
    claim.disabled = disabled;
    claim.onclick = () => propose({ t: "claim", bit_id: bit.bit_id }, bit.bit_id);
    card.appendChild(claim);
  }
  if (mine && !done) {
    const select = document.createElement("select");
    for (const status of ["not_attempted", "in_progress", "blocked", "completed"]) {
      const opt = document.createElement("option");
      opt.value = status;
      opt.textContent = status.replace("_", " ");
      opt.selected = status === bit.status;
      select.appendChild(opt);
    }
    select.disabled = disabled;
    select.onchange = () =>
      propose({ t: "set_status", bit_id: bit.bit_id, status: select.value }, bit.bit_id);
    card.appendChild(select);

    const place = document.createElement("button");
    place.textContent = placeTarget === bit.bit_id ? "click map..." : "place";
    place.disabled = disabled;
    place.onclick = () => {
      placeTarget = placeTarget === bit.bit_id ? null : bit.bit_id;
      render();
    };
    card.appendChild(place);
    if (bit.placement.kind === "placed") {
      const back = document.createElement("button");
      back.textContent = "restack";
      back.disabled = disabled;
      back.onclick = () =>
        propose({ t: "return_to_stack", bit_id: bit.bit_id }, bit.bit_id);
      card.appendChild(back);
    }
  }
  return card;
}

function render(): void {
  const state = mirror.state;
  if (!state) return;
  const lanes = $("lanes");
  lanes.replaceChildren();

  const users = Object.entries(state.users).sort((a, b) => a[1].order - b[1].order);
  for (const [uid, user] of users) {
    const lane = document.createElement("div");
    lane.className = "lane";

    const owned = Object.values(state.bits).filter((b) => b.owner === uid);
    const doneCount = owned.filter((b) => b.status === "completed").length;

    const head = document.createElement("div");
    head.className = "lane-head";
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = colorCss(user.color_index);
    head.appendChild(swatch);
    const label = document.createElement("span");
    label.textContent =
      user.name +
      (user.badge ? ` (#${user.badge + 1})` : "") +
      (uid === mirror.userId ? " (you)" : "") +
      (user.present ? "" : " (away)");
    head.appendChild(label);
    const bar = document.createElement("div");
    bar.className = "progress";
    const fill = document.createElement("div");
    fill.style.width = owned.length ? `${(100 * doneCount) / owned.length}%` : "0";
    bar.appendChild(fill);
    const count = document.createElement("span");
    count.className = "count";
    count.textContent = `${doneCount}/${owned.length}`;
    head.appendChild(bar);
    head.appendChild(count);
    lane.appendChild(head);

    for (const bid of user.stack) lane.appendChild(bitCard(state, state.bits[bid]));
    const placed = owned.filter((b) => b.placement.kind === "placed");
    if (placed.length) {
      const hdr = document.createElement("div");
      hdr.className = "placed-hdr";
      hdr.textContent = "placed in the room:";
      lane.appendChild(hdr);
      for (const bit of placed) lane.appendChild(bitCard(state, bit));
    }
    lanes.appendChild(lane);
  }

  renderBirdseye(state);
  renderAlerts(state);
}

function renderBirdseye(state: StateJson): void {
  const canvas = $("map") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const { width, height } = canvas;
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, width, height);
  ctx.strokeStyle = "#333";
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);

  const toPx = (x: number, z: number): [number, number] => [
    ((x + RENDER.mapBoundsM) / (2 * RENDER.mapBoundsM)) * width,
    height - ((z + RENDER.mapBoundsM) / (2 * RENDER.mapBoundsM)) * height,
  ];

  for (const [, user] of Object.entries(state.users)) {
    if (!user.present) continue;
    const [px, py] = toPx(user.pose.position[0], user.pose.position[2]);
    ctx.fillStyle = colorCss(user.color_index);
    ctx.beginPath();
    ctx.arc(px, py, 7, 0, 2 * Math.PI);
    ctx.fill();
    const [fx, fz] = [user.pose.forward[0], user.pose.forward[2]];
    ctx.strokeStyle = ctx.fillStyle;
    ctx.beginPath();
    ctx.moveTo(px, py);
    ctx.lineTo(px + fx * 14, py - fz * 14);
    ctx.stroke();
  }
  for (const bit of Object.values(state.bits)) {
    if (bit.placement.kind !== "placed") continue;
    const [x, , z] = bit.placement.position;
    const [px, py] = toPx(x, z);
    ctx.fillStyle = colorCss(state.users[bit.owner]?.color_index ?? 0);
    ctx.fillRect(px - 5, py - 5, 10, 10);
    if (bit.ordinal !== null) {
      ctx.fillStyle = "#fff";
      ctx.font = "10px sans-serif";
      ctx.fillText(String(bit.ordinal), px - 2, py + 3);
    }
  }
}

function renderAlerts(state: StateJson): void {
  const list = $("alerts");
  list.replaceChildren();
  for (const bit of Object.values(state.bits)) {
    if (bit.status !== "blocked") continue;
    const item = document.createElement("li");
    const owner = state.users[bit.owner];
    item.textContent = `${owner?.name ?? bit.owner} is blocked on: ${bit.text}`;
    list.appendChild(item);
  }
  ($("alerts-panel") as HTMLElement).style.display = list.children.length
    ? "block"
    : "none";
}

// --- boot ---------------------------------------------------------------------

function boot(): void {
  ($("map") as HTMLCanvasElement).onclick = (ev) => {
    if (!placeTarget) return;
    const canvas = ev.currentTarget as HTMLCanvasElement;
    const rect = canvas.getBoundingClientRect();
    const nx = (ev.clientX - rect.left) / rect.width;
    const nz = 1 - (ev.clientY - rect.top) / rect.height;
    const x = Math.round((nx * 2 - 1) * RENDER.mapBoundsM * 100) / 100;
    const z = Math.round((nz * 2 - 1) * RENDER.mapBoundsM * 100) / 100;
    propose({ t: "place", bit_id: placeTarget, position: [x, 1.0, z] }, placeTarget);
    placeTarget = null;
    render();
  };

  ($("join-form") as HTMLFormElement).onsubmit = (ev) => {
    ev.preventDefault();
    const name = ($("name") as HTMLInputElement).value.trim();
    if (!name || joined) return;
    mirror.name = name;
    joined = true;
    if (socket && socket.readyState === WebSocket.OPEN) {
      // identity on this connection was set at hello; reconnect to rename
      socket.onclose = null;
      socket.close();
      connect();
      const waitOpen = setInterval(() => {
        if (socket && socket.readyState === WebSocket.OPEN) {
          clearInterval(waitOpen);
          propose({ t: "join", name });
        }
      }, 50);
    }
    ($("join-form") as HTMLElement).style.display = "none";
  };

  connect();
}

boot();
