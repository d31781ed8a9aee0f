"""Action scripts: scripted stand-ins for human participants.

A script is JSON-lines, each line {"at_ms": offset, "event": payload}, with
non-decreasing offsets. The same files drive the reference client against
a live server (real sleeps) and the simulation harness (virtual clock).
"""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

from . import session as session_mod
from .canonical import canonical_json
from .errors import MalformedMessage

Script = list[tuple[int, dict]]


def load_script(path: str | Path) -> Script:
    script: Script = []
    last = 0
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{i}: bad JSON: {exc}") from None
            if not isinstance(entry, dict):
                raise ValueError(f"{path}:{i}: entry must be an object")
            at_ms = entry.get("at_ms")
            if not isinstance(at_ms, int) or isinstance(at_ms, bool) or at_ms < 0:
                raise ValueError(f"{path}:{i}: at_ms must be a non-negative integer")
            if at_ms < last:
                raise ValueError(f"{path}:{i}: at_ms decreased ({at_ms} < {last})")
            last = at_ms
            payload = entry.get("event")
            try:
                session_mod.event_from_payload(payload)
            except MalformedMessage as exc:
                raise ValueError(f"{path}:{i}: bad event: {exc}") from None
            script.append((at_ms, payload))
    return script


def save_script(path: str | Path, script: Script) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for at_ms, payload in script:
            fh.write(canonical_json({"at_ms": at_ms, "event": payload}))
            fh.write("\n")


def load_script_dir(directory: str | Path, clients: int) -> list[Script]:
    """Assign sorted *.jsonl files to clients in order, cycling if short."""
    paths = sorted(Path(directory).glob("*.jsonl"))
    if not paths:
        raise ValueError(f"no *.jsonl scripts in {directory}")
    return [load_script(paths[i % len(paths)]) for i in range(clients)]


# ---------------------------------------------------------------------------
# Random proposal generation for convergence runs


def _numbered_doc(steps: int) -> dict:
    lines = ["Bench procedure (generated).", ""]
    for i in range(1, steps + 1):
        lines.append(f"{i}. Carry out action number {i} at the bench.")
    return {
        "doc_id": "generated",
        "title": "Generated procedure",
        "body": "\n".join(lines) + "\n",
        "cohesion": None,
    }


def generate_scripts(
    seed: int, clients: int, proposals: int, steps: int = 8
) -> list[Script]:
    """Deterministically generate k scripts totalling `proposals` proposals.

    Client 1 joins, loads a numbered document and fragments it once all
    clients are in; the rest is a seeded mix of claims, status changes,
    placements, pose moves, stack returns and occasional reorders. Every
    proposal is well-formed; acceptance depends on interleaving, which is
    the point.
    """
    if clients < 1:
        raise ValueError("clients must be >= 1")
    rng = random.Random(seed)
    scripts: list[Script] = [[] for _ in range(clients)]
    budget = proposals

    for i in range(clients):
        if budget <= 0:
            break
        scripts[i].append((10 * i, {"t": "join", "name": f"c{i + 1}"}))
        budget -= 1
    if budget > 0:
        scripts[0].append((200, {"t": "load_document", "doc": _numbered_doc(steps)}))
        budget -= 1
    if budget > 0:
        scripts[0].append((800, {"t": "fragment_steps", "user_count": clients}))
        budget -= 1

    bit_ids = [f"b{i}" for i in range(1, steps + 1)]
    statuses = ["not_attempted", "in_progress", "blocked", "completed"]
    t = 1000
    while budget > 0:
        t += rng.randint(5, 40)
        who = rng.randrange(clients)
        roll = rng.random()
        if roll < 0.30:
            payload = {"t": "claim", "bit_id": rng.choice(bit_ids)}
        elif roll < 0.55:
            payload = {
                "t": "set_status",
                "bit_id": rng.choice(bit_ids),
                "status": rng.choice(statuses),
            }
        elif roll < 0.70:
            payload = {
                "t": "place",
                "bit_id": rng.choice(bit_ids),
                "position": [
                    round(rng.uniform(-5, 5), 3),
                    round(rng.uniform(0, 2), 3),
                    round(rng.uniform(-5, 5), 3),
                ],
            }
        elif roll < 0.85:
            yaw = rng.uniform(0, 2 * math.pi)
            payload = {
                "t": "move_pose",
                "pose": {
                    "position": [
                        round(rng.uniform(-5, 5), 3),
                        1.6,
                        round(rng.uniform(-5, 5), 3),
                    ],
                    "forward": [math.sin(yaw), 0.0, math.cos(yaw)],
                    "up": [0.0, 1.0, 0.0],
                },
            }
        elif roll < 0.95:
            payload = {"t": "return_to_stack", "bit_id": rng.choice(bit_ids)}
        else:
            guess = rng.sample(bit_ids, k=min(3, len(bit_ids)))
            payload = {"t": "reorder_stack", "order": guess}
        scripts[who].append((t, payload))
        budget -= 1
    return scripts
