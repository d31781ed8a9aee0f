"""Bundled demo assets: an 8-step lab document and a scripted two-user
session in which one participant takes over a partner's step."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def asset_path(*parts: str) -> Path:
    return Path(resources.files(__package__).joinpath(*parts))  # type: ignore[arg-type]


def document_text() -> str:
    return asset_path("lab_8step.txt").read_text(encoding="utf-8")


def script_dir() -> Path:
    return asset_path("scripts")
