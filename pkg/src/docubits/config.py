"""Server/engine configuration: frustum, animation constants, palette.

Loaded from a JSON file and overridable by CLI flags; everything has a
working default so a bare `docubits serve --port N` just runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .animation import DEFAULT_ANIMATION, AnimationConfig
from .bits import PALETTE
from .spatial import DEFAULT_FRUSTUM, Frustum


@dataclass
class EngineConfig:
    session_id: str = "default"
    frustum: Frustum = DEFAULT_FRUSTUM
    animation: AnimationConfig = DEFAULT_ANIMATION
    palette: tuple[tuple[int, int, int], ...] = PALETTE
    # Which statuses spawn tag-along clones for out-of-view placed bits.
    clone_statuses: tuple[str, ...] = ("in_progress",)


def load_config(path: str | Path) -> EngineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")

    cfg = EngineConfig()
    if "session_id" in data:
        cfg.session_id = str(data["session_id"])
    if "frustum" in data:
        f = data["frustum"]
        cfg.frustum = Frustum(
            h_fov_deg=float(f.get("h_fov_deg", DEFAULT_FRUSTUM.h_fov_deg)),
            v_fov_deg=float(f.get("v_fov_deg", DEFAULT_FRUSTUM.v_fov_deg)),
            near=float(f.get("near", DEFAULT_FRUSTUM.near)),
            far=float(f.get("far", DEFAULT_FRUSTUM.far)),
        )
    if "animation" in data:
        a = data["animation"]
        base = DEFAULT_ANIMATION
        cfg.animation = AnimationConfig(
            rise_rate=float(a.get("rise_rate", base.rise_rate)),
            rise_cap=float(a.get("rise_cap", base.rise_cap)),
            fade_rate=float(a.get("fade_rate", base.fade_rate)),
            fade_floor=float(a.get("fade_floor", base.fade_floor)),
            bounce_amplitude=float(a.get("bounce_amplitude", base.bounce_amplitude)),
            bounce_hz=float(a.get("bounce_hz", base.bounce_hz)),
        )
    if "palette" in data:
        palette = tuple(
            (int(rgb[0]), int(rgb[1]), int(rgb[2])) for rgb in data["palette"]
        )
        if not palette:
            raise ValueError("palette must not be empty")
        cfg.palette = palette
    if "clone_statuses" in data:
        cfg.clone_statuses = tuple(str(s) for s in data["clone_statuses"])
    return cfg
