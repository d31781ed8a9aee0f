"""The event-sourced session engine.

All shared state lives in a SessionState and changes only through `apply`,
which validates one proposed event and either returns the next state or a
RejectReason. Committed events form a single total order (seq 1..n); the
same log replayed anywhere reproduces the same state, byte for byte under
the canonical serialization, which is what the whole replication story
hangs on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Union

from . import bits as bits_mod
from . import canonical
from . import document as doc_mod
from .bits import DocuBit, InStack, Placed, Placement, Status, status_from_name
from .document import SourceDocument
from .errors import CorruptLog, MalformedMessage, Rejected, RejectReason
from .spatial import DEFAULT_POSE, Pose

# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class Join:
    name: str


@dataclass(frozen=True)
class Leave:
    pass


@dataclass(frozen=True)
class LoadDocument:
    doc: SourceDocument


@dataclass(frozen=True)
class FragmentSteps:
    user_count: int


@dataclass(frozen=True)
class FragmentHighlight:
    span: tuple[int, int]


@dataclass(frozen=True)
class Claim:
    bit_id: str


@dataclass(frozen=True)
class Place:
    bit_id: str
    position: tuple[float, float, float]


@dataclass(frozen=True)
class ReturnToStack:
    bit_id: str


@dataclass(frozen=True)
class SetStatus:
    bit_id: str
    status: Status


@dataclass(frozen=True)
class MovePose:
    pose: Pose


@dataclass(frozen=True)
class ReorderStack:
    order: tuple[str, ...]


SessionEvent = Union[
    Join, Leave, LoadDocument, FragmentSteps, FragmentHighlight,
    Claim, Place, ReturnToStack, SetStatus, MovePose, ReorderStack,
]


@dataclass(frozen=True)
class Committed:
    """An event accepted into the total order."""

    seq: int
    actor: str
    ts: int  # ms since session start, server-assigned
    event: SessionEvent


# ---------------------------------------------------------------------------
# State


@dataclass(frozen=True)
class UserInfo:
    name: str
    color_index: int
    badge: int          # >0 when the palette wrapped around
    order: int          # join order, drives the task split
    present: bool
    pose: Pose
    stack: tuple[str, ...] = ()


@dataclass(frozen=True)
class SessionState:
    session_id: str = "default"
    document: Optional[SourceDocument] = None
    users: dict[str, UserInfo] = field(default_factory=dict)
    bits: dict[str, DocuBit] = field(default_factory=dict)
    last_seq: int = 0
    started_at: int = 0


def empty_state(session_id: str = "default", started_at: int = 0) -> SessionState:
    return SessionState(session_id=session_id, started_at=started_at)


ApplyResult = Union[SessionState, RejectReason]


# ---------------------------------------------------------------------------
# Transition function


def _present_users_in_join_order(state: SessionState) -> list[str]:
    present = [(u.order, uid) for uid, u in state.users.items() if u.present]
    present.sort()
    return [uid for _, uid in present]


def _with_user(state: SessionState, uid: str, user: UserInfo) -> dict[str, UserInfo]:
    users = dict(state.users)
    users[uid] = user
    return users


def _renumber(stack: tuple[str, ...], bits: dict[str, DocuBit]) -> None:
    for i, bid in enumerate(stack):
        bits[bid] = replace(bits[bid], placement=InStack(i))


def _pop_from_stack(
    users: dict[str, UserInfo], bits: dict[str, DocuBit], bit: DocuBit
) -> None:
    """Remove an InStack bit from its owner's stack, closing the gap."""
    holder = users.get(bit.owner)
    if holder is None or bit.bit_id not in holder.stack:
        return
    new_stack = tuple(b for b in holder.stack if b != bit.bit_id)
    users[bit.owner] = replace(holder, stack=new_stack)
    _renumber(new_stack, bits)


def _finite3(v) -> Optional[tuple[float, float, float]]:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        return None
    out = []
    for c in v:
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            return None
        out.append(float(c))
    return (out[0], out[1], out[2])


def apply(
    state: SessionState, actor: str, event: SessionEvent, seq: int, ts: int
) -> ApplyResult:
    """Validate and apply one event; rejections leave state untouched."""
    if seq != state.last_seq + 1:
        raise ValueError(f"seq {seq} applied to state at {state.last_seq}")
    try:
        nxt = _apply_inner(state, actor, event, seq, ts)
    except Rejected as rej:
        return rej.reason
    return replace(nxt, last_seq=seq)


def _require_present(state: SessionState, actor: str) -> UserInfo:
    user = state.users.get(actor)
    if user is None or not user.present:
        raise Rejected(RejectReason.BAD_SPAN, f"actor {actor} not in session")
    return user


def _require_bit(state: SessionState, bit_id: str) -> DocuBit:
    bit = state.bits.get(bit_id)
    if bit is None:
        raise Rejected(RejectReason.UNKNOWN_BIT, bit_id)
    return bit


def _apply_inner(
    state: SessionState, actor: str, event: SessionEvent, seq: int, ts: int
) -> SessionState:
    if isinstance(event, Join):
        existing = state.users.get(actor)
        if existing is not None:
            if existing.present:
                raise Rejected(RejectReason.NO_CHANGE, "already joined")
            user = replace(existing, present=True, name=event.name)
        else:
            order = len(state.users)
            user = UserInfo(
                name=event.name,
                color_index=order % len(bits_mod.PALETTE),
                badge=order // len(bits_mod.PALETTE),
                order=order,
                present=True,
                pose=DEFAULT_POSE,
            )
        return replace(state, users=_with_user(state, actor, user))

    if isinstance(event, Leave):
        user = state.users.get(actor)
        if user is None or not user.present:
            raise Rejected(RejectReason.NO_CHANGE, "not present")
        return replace(
            state, users=_with_user(state, actor, replace(user, present=False))
        )

    if isinstance(event, Claim):
        # Completed-lock outranks everything else about a claim: the bit
        # exists and is finished, so the answer is AlreadyCompleted no
        # matter who asks.
        bit = _require_bit(state, event.bit_id)
        if bit.status is Status.COMPLETED:
            raise Rejected(RejectReason.ALREADY_COMPLETED)
        _require_present(state, actor)
        if bit.owner == actor:
            raise Rejected(RejectReason.SELF_CLAIM)
        users = dict(state.users)
        bits = dict(state.bits)
        _pop_from_stack(users, bits, bit)
        claimant = users[actor]
        claimed = bits_mod.claim(bit, actor, seq, len(claimant.stack))
        bits[event.bit_id] = claimed
        users[actor] = replace(claimant, stack=claimant.stack + (event.bit_id,))
        return replace(state, users=users, bits=bits)

    _require_present(state, actor)

    if isinstance(event, LoadDocument):
        if state.document is not None and any(
            b.doc_id == state.document.doc_id for b in state.bits.values()
        ):
            raise Rejected(RejectReason.ALREADY_FRAGMENTED)
        return replace(state, document=event.doc)

    if isinstance(event, FragmentSteps):
        if state.document is None:
            raise Rejected(RejectReason.NO_DOCUMENT)
        if state.bits:
            raise Rejected(RejectReason.ALREADY_FRAGMENTED)
        participants = _present_users_in_join_order(state)
        if event.user_count != len(participants):
            raise Rejected(
                RejectReason.BAD_SPAN,
                f"user_count {event.user_count} != {len(participants)} present",
            )
        segments = doc_mod.parse_steps(state.document)
        split = bits_mod.assign_split(
            segments, state.document.cohesion, participants
        )
        by_ordinal = {seg.ordinal: seg for seg in segments}
        users = dict(state.users)
        bits = dict(state.bits)
        next_id = len(bits) + 1
        for uid in participants:
            holder = users[uid]
            stack = list(holder.stack)
            for ordinal in split[uid]:
                seg = by_ordinal[ordinal]
                bid = f"b{next_id}"
                next_id += 1
                bits[bid] = DocuBit(
                    bit_id=bid,
                    doc_id=state.document.doc_id,
                    span=seg.span,
                    text=seg.text,
                    ordinal=seg.ordinal,
                    owner=uid,
                    owner_history=((uid, seq),),
                    status=Status.NOT_ATTEMPTED,
                    placement=InStack(len(stack)),
                    status_changed_at=ts,
                    created_by=actor,
                )
                stack.append(bid)
            users[uid] = replace(holder, stack=tuple(stack))
        return replace(state, users=users, bits=bits)

    if isinstance(event, FragmentHighlight):
        if state.document is None:
            raise Rejected(RejectReason.NO_DOCUMENT)
        existing = [
            b.span for b in state.bits.values()
            if b.doc_id == state.document.doc_id
        ]
        seg = doc_mod.segment_by_highlight(
            state.document, event.span, existing, creator=actor
        )
        users = dict(state.users)
        bits = dict(state.bits)
        holder = users[actor]
        bid = f"b{len(bits) + 1}"
        bits[bid] = DocuBit(
            bit_id=bid,
            doc_id=state.document.doc_id,
            span=seg.span,
            text=seg.text,
            ordinal=None,
            owner=actor,
            owner_history=((actor, seq),),
            status=Status.NOT_ATTEMPTED,
            placement=InStack(len(holder.stack)),
            status_changed_at=ts,
            created_by=actor,
        )
        users[actor] = replace(holder, stack=holder.stack + (bid,))
        return replace(state, users=users, bits=bits)

    if isinstance(event, Place):
        bit = _require_bit(state, event.bit_id)
        if bit.owner != actor:
            raise Rejected(RejectReason.NOT_OWNER)
        if bit.status is Status.COMPLETED:
            raise Rejected(RejectReason.ALREADY_COMPLETED)
        pos = _finite3(event.position)
        if pos is None:
            raise Rejected(RejectReason.BAD_SPAN, "position must be 3 finite numbers")
        users = dict(state.users)
        bits = dict(state.bits)
        _pop_from_stack(users, bits, bit)
        bits[event.bit_id] = replace(bits[event.bit_id], placement=Placed(pos))
        return replace(state, users=users, bits=bits)

    if isinstance(event, ReturnToStack):
        bit = _require_bit(state, event.bit_id)
        if bit.owner != actor:
            raise Rejected(RejectReason.NOT_OWNER)
        if bit.status is Status.COMPLETED:
            raise Rejected(RejectReason.ALREADY_COMPLETED)
        if isinstance(bit.placement, InStack):
            raise Rejected(RejectReason.NO_CHANGE, "already in stack")
        users = dict(state.users)
        bits = dict(state.bits)
        holder = users[actor]
        bits[event.bit_id] = replace(bit, placement=InStack(len(holder.stack)))
        users[actor] = replace(holder, stack=holder.stack + (event.bit_id,))
        return replace(state, users=users, bits=bits)

    if isinstance(event, SetStatus):
        bit = _require_bit(state, event.bit_id)
        changed = bits_mod.set_status(bit, event.status, actor, ts)
        bits = dict(state.bits)
        bits[event.bit_id] = changed
        return replace(state, bits=bits)

    if isinstance(event, MovePose):
        user = state.users[actor]
        return replace(
            state, users=_with_user(state, actor, replace(user, pose=event.pose))
        )

    if isinstance(event, ReorderStack):
        user = state.users[actor]
        if sorted(event.order) != sorted(user.stack):
            raise Rejected(
                RejectReason.BAD_SPAN, "order must permute the actor's stack"
            )
        if event.order == user.stack:
            raise Rejected(RejectReason.NO_CHANGE)
        users = dict(state.users)
        bits = dict(state.bits)
        users[actor] = replace(user, stack=event.order)
        _renumber(event.order, bits)
        return replace(state, users=users, bits=bits)

    raise MalformedMessage(f"unknown event type {type(event).__name__}")


def replay(events: list[Committed], initial: Optional[SessionState] = None) -> SessionState:
    """Fold committed events from the empty state (or a snapshot).

    Committed logs contain only accepted events, so any rejection here
    means the log is corrupt.
    """
    state = initial if initial is not None else empty_state()
    expected = state.last_seq + 1
    for ev in events:
        if ev.seq != expected:
            raise CorruptLog(f"expected seq {expected}, log has {ev.seq}")
        result = apply(state, ev.actor, ev.event, ev.seq, ev.ts)
        if isinstance(result, RejectReason):
            raise CorruptLog(
                f"committed event seq {ev.seq} rejected on replay: {result}"
            )
        state = result
        expected += 1
    return state


# ---------------------------------------------------------------------------
# Canonical serialization (snapshots, hashing, wire)


def _placement_to_canonical(p: Placement) -> dict:
    if isinstance(p, InStack):
        return {"kind": "stack", "stack_position": p.stack_position}
    return {"kind": "placed", "position": list(p.position)}


def _placement_from_canonical(d: Any) -> Placement:
    if not isinstance(d, dict):
        raise MalformedMessage("placement must be an object")
    if d.get("kind") == "stack":
        return InStack(int(d["stack_position"]))
    if d.get("kind") == "placed":
        pos = _finite3(d.get("position"))
        if pos is None:
            raise MalformedMessage("bad placed position")
        return Placed(pos)
    raise MalformedMessage(f"unknown placement kind {d.get('kind')!r}")


def _pose_to_canonical(pose: Pose) -> dict:
    return {
        "position": list(pose.position),
        "forward": list(pose.forward),
        "up": list(pose.up),
    }


def _pose_from_canonical(d: Any) -> Pose:
    if not isinstance(d, dict):
        raise MalformedMessage("pose must be an object")
    pos = _finite3(d.get("position"))
    fwd = _finite3(d.get("forward"))
    up = _finite3(d.get("up"))
    if pos is None or fwd is None or up is None:
        raise MalformedMessage("pose needs position/forward/up 3-vectors")
    try:
        return Pose(position=pos, forward=fwd, up=up)
    except ValueError as exc:
        raise MalformedMessage(str(exc)) from None


def to_canonical(state: SessionState) -> dict:
    doc = state.document
    return {
        "session_id": state.session_id,
        "started_at": state.started_at,
        "last_seq": state.last_seq,
        "document": None if doc is None else {
            "doc_id": doc.doc_id,
            "title": doc.title,
            "body": doc.body,
            "cohesion": None if doc.cohesion is None
            else [list(g) for g in doc.cohesion],
        },
        "users": {
            uid: {
                "name": u.name,
                "color_index": u.color_index,
                "badge": u.badge,
                "order": u.order,
                "present": u.present,
                "pose": _pose_to_canonical(u.pose),
                "stack": list(u.stack),
            }
            for uid, u in state.users.items()
        },
        "bits": {
            bid: {
                "bit_id": b.bit_id,
                "doc_id": b.doc_id,
                "span": list(b.span),
                "text": b.text,
                "ordinal": b.ordinal,
                "owner": b.owner,
                "owner_history": [[u, s] for u, s in b.owner_history],
                "status": b.status.value,
                "placement": _placement_to_canonical(b.placement),
                "status_changed_at": b.status_changed_at,
                "created_by": b.created_by,
            }
            for bid, b in state.bits.items()
        },
    }


def from_canonical(data: Any) -> SessionState:
    if not isinstance(data, dict):
        raise MalformedMessage("state must be an object")
    try:
        doc = None
        if data["document"] is not None:
            d = data["document"]
            cohesion = d.get("cohesion")
            doc = SourceDocument(
                doc_id=str(d["doc_id"]),
                title=str(d["title"]),
                body=str(d["body"]),
                cohesion=None if cohesion is None
                else doc_mod.validate_cohesion_shape(cohesion),
            )
        users = {}
        for uid, u in data["users"].items():
            users[uid] = UserInfo(
                name=str(u["name"]),
                color_index=int(u["color_index"]),
                badge=int(u["badge"]),
                order=int(u["order"]),
                present=bool(u["present"]),
                pose=_pose_from_canonical(u["pose"]),
                stack=tuple(str(b) for b in u["stack"]),
            )
        bits = {}
        for bid, b in data["bits"].items():
            ordinal = b["ordinal"]
            bits[bid] = DocuBit(
                bit_id=str(b["bit_id"]),
                doc_id=str(b["doc_id"]),
                span=(int(b["span"][0]), int(b["span"][1])),
                text=str(b["text"]),
                ordinal=None if ordinal is None else int(ordinal),
                owner=str(b["owner"]),
                owner_history=tuple(
                    (str(u), int(s)) for u, s in b["owner_history"]
                ),
                status=status_from_name(b["status"]),
                placement=_placement_from_canonical(b["placement"]),
                status_changed_at=int(b["status_changed_at"]),
                created_by=str(b["created_by"]),
            )
        return SessionState(
            session_id=str(data["session_id"]),
            document=doc,
            users=users,
            bits=bits,
            last_seq=int(data["last_seq"]),
            started_at=int(data["started_at"]),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise MalformedMessage(f"bad state payload: {exc}") from None


def snapshot_hash(state: SessionState) -> str:
    """SHA-256 digest of the canonical state serialization."""
    return canonical.digest(to_canonical(state))


# ---------------------------------------------------------------------------
# Event wire form

_EVENT_TAGS = {
    Join: "join",
    Leave: "leave",
    LoadDocument: "load_document",
    FragmentSteps: "fragment_steps",
    FragmentHighlight: "fragment_highlight",
    Claim: "claim",
    Place: "place",
    ReturnToStack: "return_to_stack",
    SetStatus: "set_status",
    MovePose: "move_pose",
    ReorderStack: "reorder_stack",
}


def event_to_payload(event: SessionEvent) -> dict:
    tag = _EVENT_TAGS[type(event)]
    if isinstance(event, Join):
        return {"t": tag, "name": event.name}
    if isinstance(event, Leave):
        return {"t": tag}
    if isinstance(event, LoadDocument):
        doc = event.doc
        return {
            "t": tag,
            "doc": {
                "doc_id": doc.doc_id,
                "title": doc.title,
                "body": doc.body,
                "cohesion": None if doc.cohesion is None
                else [list(g) for g in doc.cohesion],
            },
        }
    if isinstance(event, FragmentSteps):
        return {"t": tag, "user_count": event.user_count}
    if isinstance(event, FragmentHighlight):
        return {"t": tag, "span": list(event.span)}
    if isinstance(event, Claim):
        return {"t": tag, "bit_id": event.bit_id}
    if isinstance(event, Place):
        return {"t": tag, "bit_id": event.bit_id, "position": list(event.position)}
    if isinstance(event, ReturnToStack):
        return {"t": tag, "bit_id": event.bit_id}
    if isinstance(event, SetStatus):
        return {"t": tag, "bit_id": event.bit_id, "status": event.status.value}
    if isinstance(event, MovePose):
        return {"t": tag, "pose": _pose_to_canonical(event.pose)}
    if isinstance(event, ReorderStack):
        return {"t": tag, "order": list(event.order)}
    raise MalformedMessage(f"unknown event {event!r}")


def _str_field(payload: dict, key: str) -> str:
    v = payload.get(key)
    if not isinstance(v, str) or not v:
        raise MalformedMessage(f"event field {key!r} must be a non-empty string")
    return v


def event_from_payload(payload: Any) -> SessionEvent:
    """Parse the wire form of an event; raises MalformedMessage on junk."""
    if not isinstance(payload, dict):
        raise MalformedMessage("event must be an object")
    tag = payload.get("t")
    if tag == "join":
        return Join(name=_str_field(payload, "name"))
    if tag == "leave":
        return Leave()
    if tag == "load_document":
        d = payload.get("doc")
        if not isinstance(d, dict):
            raise MalformedMessage("load_document needs a doc object")
        cohesion = d.get("cohesion")
        try:
            doc = SourceDocument(
                doc_id=_str_field(d, "doc_id"),
                title=str(d.get("title", "")),
                body=_str_field(d, "body"),
                cohesion=None if cohesion is None
                else doc_mod.validate_cohesion_shape(cohesion),
            )
        except ValueError as exc:
            raise MalformedMessage(str(exc)) from None
        return LoadDocument(doc=doc)
    if tag == "fragment_steps":
        n = payload.get("user_count")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise MalformedMessage("user_count must be a positive integer")
        return FragmentSteps(user_count=n)
    if tag == "fragment_highlight":
        span = payload.get("span")
        if (
            not isinstance(span, list) or len(span) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in span)
        ):
            raise MalformedMessage("span must be [start, end] integers")
        return FragmentHighlight(span=(span[0], span[1]))
    if tag == "claim":
        return Claim(bit_id=_str_field(payload, "bit_id"))
    if tag == "place":
        pos = _finite3(payload.get("position"))
        if pos is None:
            raise MalformedMessage("position must be 3 finite numbers")
        return Place(bit_id=_str_field(payload, "bit_id"), position=pos)
    if tag == "return_to_stack":
        return ReturnToStack(bit_id=_str_field(payload, "bit_id"))
    if tag == "set_status":
        try:
            status = status_from_name(_str_field(payload, "status"))
        except ValueError as exc:
            raise MalformedMessage(str(exc)) from None
        return SetStatus(bit_id=_str_field(payload, "bit_id"), status=status)
    if tag == "move_pose":
        return MovePose(pose=_pose_from_canonical(payload.get("pose")))
    if tag == "reorder_stack":
        order = payload.get("order")
        if not isinstance(order, list) or not all(isinstance(b, str) for b in order):
            raise MalformedMessage("order must be a list of bit ids")
        return ReorderStack(order=tuple(order))
    raise MalformedMessage(f"unknown event tag {tag!r}")


def committed_to_payload(ev: Committed) -> dict:
    return {
        "seq": ev.seq,
        "actor": ev.actor,
        "ts": ev.ts,
        "event": event_to_payload(ev.event),
    }


def committed_from_payload(payload: Any) -> Committed:
    if not isinstance(payload, dict):
        raise MalformedMessage("committed event must be an object")
    seq, ts = payload.get("seq"), payload.get("ts")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 1:
        raise MalformedMessage("seq must be a positive integer")
    if not isinstance(ts, int) or isinstance(ts, bool) or ts < 0:
        raise MalformedMessage("ts must be a non-negative integer")
    return Committed(
        seq=seq,
        actor=_str_field(payload, "actor"),
        ts=ts,
        event=event_from_payload(payload.get("event")),
    )


# ---------------------------------------------------------------------------
# Invariant checking (used by tests and the reference client)


def check_state(state: SessionState) -> None:
    """Assert the structural invariants; raises AssertionError on violation."""
    in_some_stack: dict[str, str] = {}
    for uid, user in state.users.items():
        for i, bid in enumerate(user.stack):
            assert bid not in in_some_stack, f"{bid} in two stacks"
            in_some_stack[bid] = uid
            bit = state.bits.get(bid)
            assert bit is not None, f"stack references unknown bit {bid}"
            assert isinstance(bit.placement, InStack), f"{bid} in stack but Placed"
            assert bit.placement.stack_position == i, (
                f"{bid} stack_position {bit.placement.stack_position} != {i}"
            )
            assert bit.owner == uid, f"{bid} in {uid}'s stack but owned by {bit.owner}"
    spans_by_doc: dict[str, list[tuple[int, int]]] = {}
    for bid, bit in state.bits.items():
        assert bit.owner_history, f"{bid} has empty owner history"
        assert bit.owner == bit.owner_history[-1][0], f"{bid} owner mismatch"
        assert bit.owner in state.users, f"{bid} owned by unrecorded user"
        seqs = [s for _, s in bit.owner_history]
        assert seqs == sorted(seqs), f"{bid} owner history out of order"
        if isinstance(bit.placement, InStack):
            assert in_some_stack.get(bid) == bit.owner, f"{bid} missing from stack"
        spans_by_doc.setdefault(bit.doc_id, []).append(bit.span)
    for doc_id, spans in spans_by_doc.items():
        spans.sort()
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2, f"overlapping spans in {doc_id}: {(s1, e1)} {(s2, e2)}"
