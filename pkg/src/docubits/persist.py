"""Durable snapshots and append-only event logs.

Snapshots hold the full canonical state (sessions are small), so a teacher
can lay out bits, save, and restart the server with the layout intact.
Logs are JSON-lines, one committed event per line, contiguous seqs; they
are never rewritten, only appended to.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Optional

from . import session as session_mod
from .canonical import canonical_json
from .errors import CorruptLog, IoFailure, MalformedMessage, VersionMismatch
from .session import Committed, SessionState

SNAPSHOT_VERSION = 1


def now_ms() -> int:
    return int(time.time() * 1000)


def save_snapshot(state: SessionState, path: str | Path, saved_at: Optional[int] = None) -> None:
    doc = {
        "version": SNAPSHOT_VERSION,
        "saved_at": now_ms() if saved_at is None else saved_at,
        "state": session_mod.to_canonical(state),
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(doc))
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write snapshot {path}: {exc}") from exc


def load_snapshot(path: str | Path) -> SessionState:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read snapshot {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"snapshot {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or data.get("version") != SNAPSHOT_VERSION:
        raise VersionMismatch(
            f"snapshot version {data.get('version')!r}, expected {SNAPSHOT_VERSION}"
        )
    if "state" not in data:
        raise IoFailure(f"snapshot {path} missing state")
    return session_mod.from_canonical(data["state"])


class EventLogWriter:
    """Append-only JSON-lines sink enforcing seq contiguity."""

    def __init__(self, path: str | Path, last_seq: int = 0):
        self.path = Path(path)
        self.last_seq = last_seq
        try:
            self._fh = open(self.path, "a", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot open log {path}: {exc}") from exc

    def append(self, ev: Committed) -> None:
        if ev.seq != self.last_seq + 1:
            raise CorruptLog(
                f"append seq {ev.seq} after {self.last_seq}; logs are contiguous"
            )
        self._fh.write(canonical_json(session_mod.committed_to_payload(ev)))
        self._fh.write("\n")
        self._fh.flush()
        self.last_seq = ev.seq

    def close(self) -> None:
        self._fh.close()


def append_event(log: EventLogWriter, ev: Committed) -> None:
    log.append(ev)


def read_log(path: str | Path) -> list[Committed]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read log {path}: {exc}") from exc
    events = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
            events.append(session_mod.committed_from_payload(payload))
        except (json.JSONDecodeError, MalformedMessage) as exc:
            raise CorruptLog(f"bad log line {i}: {exc}") from exc
    return events


def replay_file(path: str | Path, initial: Optional[SessionState] = None) -> SessionState:
    """Replay a log file from the empty state (or a restored snapshot)."""
    return session_mod.replay(read_log(path), initial=initial)
