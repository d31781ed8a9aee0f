"""Rejection reasons and error types shared across the engine."""

from __future__ import annotations

import enum


class RejectReason(enum.Enum):
    """Why a proposed event was refused. Rejections are values, not faults."""

    NOT_OWNER = "NotOwner"
    ALREADY_COMPLETED = "AlreadyCompleted"
    NO_DOCUMENT = "NoDocument"
    ALREADY_FRAGMENTED = "AlreadyFragmented"
    UNKNOWN_BIT = "UnknownBit"
    OVERLAPS_EXISTING = "OverlapsExisting"
    EMPTY_AFTER_TRIM = "EmptyAfterTrim"
    NO_STEPS = "NoSteps"
    MALFORMED_NUMBERING = "MalformedNumbering"
    MORE_USERS_THAN_GROUPS = "MoreUsersThanGroups"
    SELF_CLAIM = "SelfClaim"
    NO_CHANGE = "NoChange"
    # BadSpan doubles as the generic malformed-proposal reason: out-of-bounds
    # or misaligned spans, and any structurally invalid payload the engine
    # refuses (bad pose, bad reorder list, unknown actor, ...).
    BAD_SPAN = "BadSpan"

    def __str__(self) -> str:
        return self.value


_BY_NAME = {r.value: r for r in RejectReason}


def reason_from_name(name: str) -> RejectReason:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown reject reason {name!r}") from None


class Rejected(Exception):
    """Raised by pure domain operations; the session engine converts it
    into a RejectReason value instead of letting it escape."""

    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


class PersistError(Exception):
    """Base class for snapshot/log storage failures."""


class IoFailure(PersistError):
    pass


class VersionMismatch(PersistError):
    pass


class CorruptLog(PersistError):
    """An event log that cannot replay: gap in seqs, bad line, or an event
    the engine rejects (committed logs contain only accepted events)."""


class MalformedMessage(Exception):
    """A wire payload or event body that does not match the schema."""
