"""DocuBits: portable instruction units with owner, status and placement.

The status machine is deliberately small: any non-completed status can be
switched to any other by the owner, and Completed is absorbing. Once a bit
is completed its owner, text, span and placement are frozen for good, which
is what keeps the shared history trustworthy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .errors import Rejected, RejectReason


class Status(enum.Enum):
    NOT_ATTEMPTED = "not_attempted"
    IN_PROGRESS = "in_progress"
    BLOCKED = "blocked"
    COMPLETED = "completed"

    def __str__(self) -> str:
        return self.value


_STATUS_BY_NAME = {s.value: s for s in Status}


def status_from_name(name: str) -> Status:
    try:
        return _STATUS_BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown status {name!r}") from None


@dataclass(frozen=True)
class InStack:
    """Tagging along in a user's stack at a 0-based position."""

    stack_position: int


@dataclass(frozen=True)
class Placed:
    """Stuck at a world position (meters); stationary until re-placed."""

    position: tuple[float, float, float]


Placement = Union[InStack, Placed]

# Ownership color palette, index order is join order. Sessions with more
# than six users wrap around and get a numeric badge.
PALETTE: tuple[tuple[int, int, int], ...] = (
    (255, 0, 0),      # red
    (0, 255, 0),      # green
    (0, 0, 255),      # blue
    (255, 165, 0),    # orange
    (128, 0, 128),    # purple
    (0, 128, 128),    # teal
)


def color_for(join_index: int, palette=PALETTE) -> tuple[tuple[int, int, int], int]:
    """(rgb, badge) for the i-th joining user; badge 0 means no badge."""
    return palette[join_index % len(palette)], join_index // len(palette)


@dataclass(frozen=True)
class DocuBit:
    bit_id: str
    doc_id: str
    span: tuple[int, int]
    text: str
    ordinal: Optional[int]
    owner: str
    owner_history: tuple[tuple[str, int], ...]  # (user, commit seq), append-only
    status: Status
    placement: Placement
    status_changed_at: int  # ms since session start
    created_by: str

    def __post_init__(self):
        if not self.owner_history or self.owner_history[-1][0] != self.owner:
            raise ValueError("owner must equal the last owner_history entry")


def set_status(bit: DocuBit, new_status: Status, actor: str, at: int) -> DocuBit:
    """Owner-only manual status selection; completed bits are locked."""
    if actor != bit.owner:
        raise Rejected(RejectReason.NOT_OWNER, f"{actor} does not own {bit.bit_id}")
    if bit.status is Status.COMPLETED:
        raise Rejected(RejectReason.ALREADY_COMPLETED)
    if new_status is bit.status:
        raise Rejected(RejectReason.NO_CHANGE)
    return replace(bit, status=new_status, status_changed_at=at)


def claim(bit: DocuBit, new_owner: str, at_seq: int, stack_position: int) -> DocuBit:
    """Transfer ownership; the bit lands in the new owner's stack.

    Completed bits cannot change hands, and claiming your own bit is a
    rejected no-op rather than a phantom history entry.
    """
    if bit.status is Status.COMPLETED:
        raise Rejected(RejectReason.ALREADY_COMPLETED)
    if new_owner == bit.owner:
        raise Rejected(RejectReason.SELF_CLAIM)
    return replace(
        bit,
        owner=new_owner,
        owner_history=bit.owner_history + ((new_owner, at_seq),),
        placement=InStack(stack_position),
    )


def _build_groups(
    ordinals: Sequence[int], cohesion: Optional[Sequence[Sequence[int]]]
) -> list[tuple[int, ...]]:
    """Cohesion groups plus singletons for uncovered steps, document order.

    Every cohesion ordinal must name a parsed step; groups stay disjoint.
    """
    if cohesion is None:
        return [(o,) for o in ordinals]
    known = set(ordinals)
    covered: set[int] = set()
    groups: list[tuple[int, ...]] = []
    for group in cohesion:
        g = tuple(group)
        for o in g:
            if o not in known:
                raise Rejected(
                    RejectReason.BAD_SPAN, f"cohesion names unknown step {o}"
                )
            if o in covered:
                raise Rejected(
                    RejectReason.BAD_SPAN, f"step {o} in two cohesion groups"
                )
            covered.add(o)
        groups.append(g)
    groups.extend((o,) for o in ordinals if o not in covered)
    groups.sort(key=lambda g: g[0])
    return groups


def _min_runs(sizes: Sequence[int], cap: int) -> int:
    """Fewest contiguous runs covering sizes with per-run sum <= cap."""
    runs, load = 1, 0
    for s in sizes:
        if load + s > cap:
            runs += 1
            load = s
        else:
            load += s
    return runs


def assign_split(
    segments: Sequence,
    cohesion: Optional[Sequence[Sequence[int]]],
    users: Sequence[str],
) -> dict[str, list[int]]:
    """Divide steps into contiguous, balanced stacks, one per user.

    Groups (cohesion runs, or one group per step) are partitioned into
    len(users) contiguous non-empty runs minimizing the maximum step count
    any user carries; ties go to the lexicographically smallest sequence of
    cut positions. Document order is preserved into each user's stack.
    """
    if not users:
        raise ValueError("users must be non-empty")
    ordinals = [seg.ordinal for seg in segments]
    groups = _build_groups(ordinals, cohesion)
    k = len(users)
    if k > len(groups):
        raise Rejected(
            RejectReason.MORE_USERS_THAN_GROUPS,
            f"{k} users but only {len(groups)} groups",
        )
    sizes = [len(g) for g in groups]

    lo, hi = max(sizes), sum(sizes)
    while lo < hi:  # smallest cap for which k runs suffice
        mid = (lo + hi) // 2
        if _min_runs(sizes, mid) <= k:
            hi = mid
        else:
            lo = mid + 1
    cap = lo

    # Lexicographically smallest cuts: make each run as short as it can be
    # while the remainder still fits in the runs left.
    bounds: list[int] = []  # cut positions: group count consumed so far
    start = 0
    for remaining in range(k - 1, 0, -1):
        load = 0
        cut = start
        while True:
            load += sizes[cut]
            cut += 1
            tail = sizes[cut:]
            if (
                load <= cap
                and len(tail) >= remaining
                and _min_runs(tail, cap) <= remaining
            ):
                break
        bounds.append(cut)
        start = cut
    bounds.append(len(groups))

    result: dict[str, list[int]] = {}
    start = 0
    for user, cut in zip(users, bounds):
        result[user] = [o for g in groups[start:cut] for o in g]
        start = cut
    return result
