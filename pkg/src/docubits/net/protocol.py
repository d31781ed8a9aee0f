"""The replication protocol, transport-free.

One JSON object per message; newline-delimited on TCP, one text frame per
message on WebSocket, identical schemas on both. ServerCore and ClientCore
hold all protocol logic with no I/O, so the real asyncio server and the
virtual-time simulation harness drive exactly the same code.

Client -> server: hello{v,name}, propose{pid,event}, resync{}, ping{}
Server -> client: welcome{v,user,seq,snapshot}, commit{seq,actor,ts,event},
                  reject{pid,reason}, pong{}

Commits reach every connected client (including the proposer) in strictly
increasing seq order; a client buffers anything that arrives early and
applies in order. Unknown or malformed messages earn a reject, never a
disconnect.
"""

from __future__ import annotations

import json
from collections import deque
from typing import Any, Callable, Optional

from .. import session as session_mod
from ..config import EngineConfig
from ..errors import MalformedMessage, RejectReason
from ..session import Committed, SessionState

PROTOCOL_VERSION = 1
MAX_MESSAGE_BYTES = 1024 * 1024

MALFORMED = "malformed"  # reject reason for protocol-level junk


def encode(msg: dict) -> str:
    return json.dumps(msg, separators=(",", ":"), sort_keys=True, ensure_ascii=False)


def _reject_constant(name: str):
    raise MalformedMessage(f"non-finite JSON constant {name}")


def decode(raw: str) -> dict:
    if len(raw.encode("utf-8")) >= MAX_MESSAGE_BYTES:
        raise MalformedMessage("message exceeds 1 MiB")
    try:
        msg = json.loads(raw, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedMessage(f"bad JSON: {exc}") from None
    if not isinstance(msg, dict):
        raise MalformedMessage("message must be a JSON object")
    return msg


class ServerCore:
    """Authoritative protocol endpoint: one session, one total order.

    Callers own transports and the clock; every entry point takes a
    connection id and returns [(conn_id, encoded_message), ...] to send.
    """

    def __init__(
        self,
        state: Optional[SessionState] = None,
        config: Optional[EngineConfig] = None,
        on_commit: Optional[Callable[[Committed], None]] = None,
    ):
        self.config = config or EngineConfig()
        self.state = state if state is not None else session_mod.empty_state(
            self.config.session_id
        )
        self.on_commit = on_commit
        self.conns: dict[Any, Optional[str]] = {}  # conn_id -> user id after hello
        self._next_user = 1
        self.commit_count = 0
        self.reject_count = 0

    # -- connection lifecycle -------------------------------------------

    def connect(self, conn_id: Any) -> None:
        self.conns[conn_id] = None

    def disconnect(self, conn_id: Any, ts: int) -> list[tuple[Any, str]]:
        """Drop a connection; a joined user implicitly leaves the session."""
        uid = self.conns.pop(conn_id, None)
        if uid is None:
            return []
        user = self.state.users.get(uid)
        if user is None or not user.present:
            return []
        return self._commit(uid, session_mod.Leave(), ts)[0]

    # -- message handling -------------------------------------------------

    def handle_line(self, conn_id: Any, raw: str, ts: int) -> list[tuple[Any, str]]:
        try:
            msg = decode(raw)
        except MalformedMessage:
            return [self._reject(conn_id, None, MALFORMED)]
        tag = msg.get("t")
        if tag == "hello":
            return self._on_hello(conn_id, msg)
        if tag == "resync":
            return self._on_resync(conn_id)
        if tag == "ping":
            return [(conn_id, encode({"t": "pong"}))]
        if tag == "pong":
            return []
        if tag == "propose":
            return self._on_propose(conn_id, msg, ts)
        return [self._reject(conn_id, _pid_of(msg), MALFORMED)]

    def _on_hello(self, conn_id: Any, msg: dict) -> list[tuple[Any, str]]:
        name = msg.get("name")
        if self.conns.get(conn_id) is not None or not isinstance(name, str) or not name:
            return [self._reject(conn_id, None, MALFORMED)]
        uid = f"u{self._next_user}"
        self._next_user += 1
        self.conns[conn_id] = uid
        return [(conn_id, self._welcome(uid))]

    def _on_resync(self, conn_id: Any) -> list[tuple[Any, str]]:
        uid = self.conns.get(conn_id)
        if uid is None:
            return [self._reject(conn_id, None, MALFORMED)]
        return [(conn_id, self._welcome(uid))]

    def _on_propose(self, conn_id: Any, msg: dict, ts: int) -> list[tuple[Any, str]]:
        pid = _pid_of(msg)
        uid = self.conns.get(conn_id)
        if uid is None or pid is None:
            return [self._reject(conn_id, pid, MALFORMED)]
        try:
            event = session_mod.event_from_payload(msg.get("event"))
        except MalformedMessage:
            return [self._reject(conn_id, pid, MALFORMED)]
        out, reason = self._commit(uid, event, ts)
        if reason is not None:
            return [self._reject(conn_id, pid, reason.value)]
        return out

    # -- internals ------------------------------------------------------

    def _welcome(self, uid: str) -> str:
        return encode({
            "t": "welcome",
            "v": PROTOCOL_VERSION,
            "user": uid,
            "seq": self.state.last_seq,
            "snapshot": session_mod.to_canonical(self.state),
        })

    def _reject(self, conn_id: Any, pid: Optional[int], reason: str) -> tuple[Any, str]:
        self.reject_count += 1
        return (conn_id, encode({"t": "reject", "pid": pid, "reason": reason}))

    def _commit(
        self, actor: str, event: session_mod.SessionEvent, ts: int
    ) -> tuple[list[tuple[Any, str]], Optional[RejectReason]]:
        seq = self.state.last_seq + 1
        result = session_mod.apply(self.state, actor, event, seq, ts)
        if isinstance(result, RejectReason):
            return [], result
        self.state = result
        committed = Committed(seq=seq, actor=actor, ts=ts, event=event)
        self.commit_count += 1
        if self.on_commit is not None:
            self.on_commit(committed)
        line = encode({"t": "commit", **session_mod.committed_to_payload(committed)})
        return [
            (cid, line) for cid, cuid in self.conns.items() if cuid is not None
        ], None

    def snapshot_hash(self) -> str:
        return session_mod.snapshot_hash(self.state)


def _pid_of(msg: dict) -> Optional[int]:
    pid = msg.get("pid")
    if isinstance(pid, int) and not isinstance(pid, bool):
        return pid
    return None


class ClientCore:
    """State mirror: applies welcome + commits in seq order, never locally.

    Out-of-order commits are buffered until the gap fills. Proposals are
    correlated FIFO: the server answers each of this client's proposals, in
    order, with either a commit (actor == us) or a reject carrying the pid.
    """

    def __init__(self, name: str):
        self.name = name
        self.user_id: Optional[str] = None
        self.state: Optional[SessionState] = None
        self._expected = 1
        self._buffer: dict[int, dict] = {}
        self._next_pid = 1
        self.pending: deque[int] = deque()
        self.rejects: list[tuple[Optional[int], str]] = []
        self.applied = 0
        self.mirror_error: Optional[str] = None
        self.on_commit: Optional[Callable[[Committed], None]] = None
        self.on_reject: Optional[Callable[[Optional[int], str], None]] = None

    # -- outgoing ---------------------------------------------------------

    def hello(self) -> str:
        return encode({"t": "hello", "v": PROTOCOL_VERSION, "name": self.name})

    def resync(self) -> str:
        return encode({"t": "resync"})

    def propose_payload(self, event_payload: dict) -> tuple[int, str]:
        pid = self._next_pid
        self._next_pid += 1
        self.pending.append(pid)
        return pid, encode({"t": "propose", "pid": pid, "event": event_payload})

    def propose(self, event: session_mod.SessionEvent) -> tuple[int, str]:
        return self.propose_payload(session_mod.event_to_payload(event))

    # -- incoming ---------------------------------------------------------

    def handle_line(self, raw: str) -> list[str]:
        try:
            msg = decode(raw)
        except MalformedMessage as exc:
            self.mirror_error = str(exc)
            return []
        tag = msg.get("t")
        if tag == "welcome":
            self._on_welcome(msg)
        elif tag == "commit":
            self._on_commit(msg)
        elif tag == "reject":
            pid = _pid_of(msg)
            reason = str(msg.get("reason"))
            self.rejects.append((pid, reason))
            if pid is not None and pid in self.pending:
                self.pending.remove(pid)
            if self.on_reject is not None:
                self.on_reject(pid, reason)
        elif tag == "ping":
            return [encode({"t": "pong"})]
        # pong and anything else: nothing to do
        return []

    def _on_welcome(self, msg: dict) -> None:
        try:
            self.state = session_mod.from_canonical(msg.get("snapshot"))
        except MalformedMessage as exc:
            self.mirror_error = f"bad welcome snapshot: {exc}"
            return
        user = msg.get("user")
        if isinstance(user, str):
            self.user_id = user  # reconnects get a fresh identity
        self._expected = self.state.last_seq + 1
        for seq in [s for s in self._buffer if s < self._expected]:
            del self._buffer[seq]
        self._drain()

    def _on_commit(self, msg: dict) -> None:
        seq = msg.get("seq")
        if not isinstance(seq, int) or seq < self._expected:
            return
        self._buffer[seq] = msg
        self._drain()

    def _drain(self) -> None:
        if self.state is None:
            return
        while self._expected in self._buffer:
            msg = self._buffer.pop(self._expected)
            try:
                committed = session_mod.committed_from_payload(msg)
            except MalformedMessage as exc:
                self.mirror_error = f"bad commit: {exc}"
                return
            result = session_mod.apply(
                self.state, committed.actor, committed.event,
                committed.seq, committed.ts,
            )
            if isinstance(result, RejectReason):
                self.mirror_error = (
                    f"commit seq {committed.seq} rejected by mirror: {result}"
                )
                return
            self.state = result
            self._expected += 1
            self.applied += 1
            if committed.actor == self.user_id and self.pending:
                self.pending.popleft()
            if self.on_commit is not None:
                self.on_commit(committed)

    def gap_pending(self) -> bool:
        """True when buffered commits are stuck behind a missing seq."""
        return bool(self._buffer) and self._expected not in self._buffer

    def snapshot_hash(self) -> Optional[str]:
        if self.state is None:
            return None
        return session_mod.snapshot_hash(self.state)
