"""Deterministic status-driven appearance.

The engine never runs an animation loop; it exposes the appearance of a bit
as a pure function of (status, seconds since the status changed) so
renderers can sample it and tests can pin exact values. Rates and
amplitudes are configuration: the behaviors (float up and fade when done,
bounce while blocked) are fixed, their magnitudes are not.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .bits import Status


class BodyTint(enum.Enum):
    WHITE = "white"
    GRAY = "gray"


class Indicator(enum.Enum):
    NONE_LIT = "none"
    GREEN = "green"
    RED = "red"
    AMBER = "amber"


@dataclass(frozen=True)
class Appearance:
    vertical_offset: float  # meters above resting position
    opacity: float          # [0, 1]
    body_tint: BodyTint
    indicator: Indicator


@dataclass(frozen=True)
class AnimationConfig:
    rise_rate: float = 0.15     # m/s float-up after completion
    rise_cap: float = 0.5       # m
    fade_rate: float = 0.2      # opacity/s after completion
    fade_floor: float = 0.35    # completed text stays legible as history
    bounce_amplitude: float = 0.05  # m, blocked-bit bounce
    bounce_hz: float = 1.0


DEFAULT_ANIMATION = AnimationConfig()


def appearance(status: Status, t: float, cfg: AnimationConfig = DEFAULT_ANIMATION) -> Appearance:
    """Appearance of a bit `t` seconds after it entered `status`."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if status is Status.NOT_ATTEMPTED:
        return Appearance(0.0, 1.0, BodyTint.WHITE, Indicator.NONE_LIT)
    if status is Status.IN_PROGRESS:
        return Appearance(0.0, 1.0, BodyTint.WHITE, Indicator.AMBER)
    if status is Status.BLOCKED:
        offset = cfg.bounce_amplitude * abs(math.sin(2.0 * math.pi * cfg.bounce_hz * t))
        return Appearance(offset, 1.0, BodyTint.WHITE, Indicator.RED)
    # Completed: float up to the cap, fade to the floor, gray tint.
    offset = min(cfg.rise_rate * t, cfg.rise_cap)
    opacity = max(1.0 - cfg.fade_rate * t, cfg.fade_floor)
    return Appearance(offset, opacity, BodyTint.GRAY, Indicator.GREEN)
