"""Bundled scenario files, addressable by bare name from the CLI."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def names() -> list[str]:
    root = resources.files(__package__)
    return sorted(p.name.removesuffix(".json") for p in root.iterdir() if p.name.endswith(".json"))


def path_for(name: str) -> Path | None:
    root = resources.files(__package__)
    candidate = root / f"{name}.json"
    if candidate.is_file():
        return Path(str(candidate))
    return None
