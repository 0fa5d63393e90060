"""Readers for the solver's trajectory CSV and metadata JSON exports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

PLAYER_FIELDS = ("s", "V", "n", "chi", "ax", "ay", "jx", "jy")


class SchemaError(ValueError):
    """An input file does not match the export schema."""


def expected_header(num_players: int) -> list[str]:
    header = ["t"]
    for i in range(num_players):
        header.extend(f"p{i + 1}_{name}" for name in PLAYER_FIELDS)
    return header


def _check_header(header: list[str], path: Path) -> int:
    if not header or header[0] != "t":
        found = header[0] if header else "<empty>"
        raise SchemaError(f"{path}: first column must be 't', found {found!r}")
    body = header[1:]
    if not body or len(body) % len(PLAYER_FIELDS) != 0:
        raise SchemaError(
            f"{path}: expected 8 columns per player after 't', found {len(body)}"
        )
    num_players = len(body) // len(PLAYER_FIELDS)
    for want, got in zip(expected_header(num_players), header):
        if want != got:
            raise SchemaError(f"{path}: unexpected column {got!r} (expected {want!r})")
    return num_players


@dataclass
class Trajectory:
    """One exported run: stage times, per-player state columns, metadata."""

    path: Path
    t: np.ndarray
    players: list[dict[str, np.ndarray]]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def num_players(self) -> int:
        return len(self.players)

    @property
    def label(self) -> str:
        return self.path.stem


def meta_path_for(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + "_meta.json")


def load_trajectory(path: str | Path) -> Trajectory:
    """Parse an exported CSV; attaches the sibling metadata file when present."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    num_players = _check_header(rows[0], path)
    data = rows[1:]
    if not data:
        raise SchemaError(f"{path}: no data rows")

    def col(idx: int, skip_empty_last: bool) -> np.ndarray:
        label = rows[0][idx]
        vals = []
        for r, row in enumerate(data):
            cell = row[idx]
            if cell == "":
                if skip_empty_last and r == len(data) - 1:
                    continue
                raise SchemaError(f"{path}: empty value in column {label!r} at row {r + 1}")
            try:
                vals.append(float(cell))
            except ValueError as err:
                raise SchemaError(
                    f"{path}: non-numeric value {cell!r} in column {label!r}"
                ) from err
        return np.asarray(vals)

    t = col(0, skip_empty_last=False)
    players = []
    for i in range(num_players):
        base = 1 + i * len(PLAYER_FIELDS)
        block = {}
        for j, name in enumerate(PLAYER_FIELDS):
            block[name] = col(base + j, skip_empty_last=name in ("jx", "jy"))
        players.append(block)

    meta: dict[str, Any] = {}
    sibling = meta_path_for(path)
    if sibling.exists():
        meta = json.loads(sibling.read_text())
    return Trajectory(path=path, t=t, players=players, meta=meta)


def load_metadata(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not valid JSON ({err})") from err
    if "state_change_norms" not in meta:
        raise SchemaError(f"{path}: missing column 'state_change_norms'")
    return meta


def check_same_schema(trajectories: list[Trajectory]) -> int:
    counts = {traj.num_players for traj in trajectories}
    if len(counts) != 1:
        detail = ", ".join(f"{t.path.name}: {t.num_players}" for t in trajectories)
        raise SchemaError(f"inputs disagree on player count ({detail})")
    return counts.pop()
