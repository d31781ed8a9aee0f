"""Avatar poses, view-frustum membership and the tag-along/clone rules.

Coordinates are right-handed, y-up, meters. All functions here are pure
geometry; the session engine stores poses, this module interprets them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .bits import Placed, Status

_UNIT_TOL = 1e-9

Vec3 = tuple[float, float, float]


def _dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _norm(a: Vec3) -> float:
    return math.sqrt(_dot(a, a))


@dataclass(frozen=True)
class Pose:
    """An avatar frame: position plus orthonormal forward/up directions."""

    position: Vec3
    forward: Vec3
    up: Vec3

    def __post_init__(self):
        if abs(_norm(self.forward) - 1.0) > _UNIT_TOL:
            raise ValueError("forward must be a unit vector")
        if abs(_norm(self.up) - 1.0) > _UNIT_TOL:
            raise ValueError("up must be a unit vector")
        if abs(_dot(self.forward, self.up)) > _UNIT_TOL:
            raise ValueError("forward and up must be orthogonal")

    @property
    def right(self) -> Vec3:
        return _cross(self.forward, self.up)


DEFAULT_POSE = Pose(position=(0.0, 0.0, 0.0), forward=(0.0, 0.0, 1.0), up=(0.0, 1.0, 0.0))


@dataclass(frozen=True)
class Frustum:
    h_fov_deg: float
    v_fov_deg: float
    near: float
    far: float

    def __post_init__(self):
        if not 0 < self.h_fov_deg < 180:
            raise ValueError("h_fov_deg must be in (0, 180)")
        if not 0 < self.v_fov_deg < 180:
            raise ValueError("v_fov_deg must be in (0, 180)")
        if not 0 < self.near < self.far:
            raise ValueError("need 0 < near < far")


# Study-HMD-ish defaults; configuration, not constants.
DEFAULT_FRUSTUM = Frustum(h_fov_deg=90.0, v_fov_deg=90.0, near=0.1, far=20.0)


@dataclass(frozen=True)
class CloneDirective:
    """A tag-along copy owed to `user` of their placed, in-progress bit."""

    user: str
    bit_id: str


def in_frustum(pose: Pose, frustum: Frustum, point: Vec3) -> bool:
    """Is the point inside the user's view frustum (boundary inclusive)?"""
    d = _sub(point, pose.position)
    z = _dot(d, pose.forward)
    if not (frustum.near <= z <= frustum.far):
        return False
    x = _dot(d, pose.right)
    if abs(x) > z * math.tan(math.radians(frustum.h_fov_deg) / 2.0):
        return False
    y = _dot(d, pose.up)
    return abs(y) <= z * math.tan(math.radians(frustum.v_fov_deg) / 2.0)


# Stack anchor offsets relative to the avatar frame, meters.
_ANCHOR_FORWARD = 0.6
_ANCHOR_DOWN = 0.15
_ANCHOR_SLOT_STEP = 0.08


def tag_along_anchor(pose: Pose, slot: int) -> Vec3:
    """World position of stack slot `slot`, rigidly fixed to the avatar."""
    if slot < 0:
        raise ValueError("slot must be >= 0")
    f, u, p = pose.forward, pose.up, pose.position
    drop = _ANCHOR_DOWN + _ANCHOR_SLOT_STEP * slot
    return (
        p[0] + _ANCHOR_FORWARD * f[0] - drop * u[0],
        p[1] + _ANCHOR_FORWARD * f[1] - drop * u[1],
        p[2] + _ANCHOR_FORWARD * f[2] - drop * u[2],
    )


def required_clones(
    state,
    frustum: Frustum = DEFAULT_FRUSTUM,
    clone_statuses: Iterable[Status] = (Status.IN_PROGRESS,),
) -> set[CloneDirective]:
    """Derived state: which placed bits currently owe their owner a clone.

    A clone exists exactly while the original is placed, in progress, and
    outside its owner's view frustum. Clones carry no state of their own,
    so recomputing on an unchanged session yields an identical set.
    Departed owners get none.
    """
    wanted = set(clone_statuses)
    out: set[CloneDirective] = set()
    for bit in state.bits.values():
        if bit.status not in wanted or not isinstance(bit.placement, Placed):
            continue
        user = state.users.get(bit.owner)
        if user is None or not user.present:
            continue
        if not in_frustum(user.pose, frustum, bit.placement.position):
            out.add(CloneDirective(user=bit.owner, bit_id=bit.bit_id))
    return out
