"""Figure rendering for exported runs: lateral paths, envelope usage, convergence."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import (
    SchemaError,
    Trajectory,
    check_same_schema,
    load_metadata,
    load_trajectory,
)

KINDS = ("trajectory", "gg-usage", "convergence")

_PLAYER_STYLES = ("-", "--", ":", "-.")
_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


@dataclass(frozen=True)
class PlotSpec:
    """What to render: input files, overlay labels, output path, figure kind."""

    kind: str
    inputs: tuple[str, ...]
    out: str
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input file is required")
        if self.labels is not None and len(self.labels) != len(self.inputs):
            raise ValueError(
                f"{len(self.labels)} labels for {len(self.inputs)} inputs"
            )


def _labels_for(spec: PlotSpec, items: Sequence) -> list[str]:
    if spec.labels is not None:
        return list(spec.labels)
    return [Path(str(p)).stem for p in spec.inputs]


def _draw_boundaries(ax, meta: dict) -> None:
    track = meta.get("track")
    if not track:
        return
    s_edges = [0.0]
    w_left, w_right = [], []
    for seg in track["segments"]:
        s_edges.append(s_edges[-1] + seg["length_m"])
        w_left.append(seg["width_left_m"])
        w_right.append(seg["width_right_m"])
    s_grid = np.asarray(s_edges)
    upper = np.asarray(w_left + [w_left[-1]])
    lower = -np.asarray(w_right + [w_right[-1]])
    ax.step(s_grid, upper, where="post", color="0.3", lw=1.2)
    ax.step(s_grid, lower, where="post", color="0.3", lw=1.2)
    pad = 0.15 * max(upper.max(), -lower.min())
    ax.fill_between(s_grid, upper, upper + pad, step="post", color="0.8", alpha=0.8)
    ax.fill_between(s_grid, lower - pad, lower, step="post", color="0.8", alpha=0.8)


def _render_trajectory(spec: PlotSpec, out: Path) -> Path:
    runs = [load_trajectory(p) for p in spec.inputs]
    check_same_schema(runs)
    labels = _labels_for(spec, runs)
    fig, ax = plt.subplots(figsize=(9.0, 4.0))
    _draw_boundaries(ax, runs[0].meta)
    for run_idx, (run, label) in enumerate(zip(runs, labels)):
        color = _COLORS[run_idx % len(_COLORS)]
        for i, player in enumerate(run.players):
            style = _PLAYER_STYLES[i % len(_PLAYER_STYLES)]
            name = f"{label} car {i + 1}" if run.num_players > 1 else label
            ax.plot(player["s"], player["n"], style, color=color, lw=1.6, label=name)
    ax.set_xlabel("progress s [m]")
    ax.set_ylabel("lateral offset n [m]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def _envelope(meta: dict, player: int, table: str, speeds: np.ndarray) -> np.ndarray | None:
    gg = meta.get("gg")
    if not gg or player >= len(gg):
        return None
    knots = np.asarray(gg[player][table], dtype=float)
    return np.interp(speeds, knots[:, 0], knots[:, 1])


def _render_gg_usage(spec: PlotSpec, out: Path) -> Path:
    runs = [load_trajectory(p) for p in spec.inputs]
    check_same_schema(runs)
    labels = _labels_for(spec, runs)
    fig, (ax_long, ax_comb) = plt.subplots(2, 1, figsize=(9.0, 6.0), sharex=True)
    for run_idx, (run, label) in enumerate(zip(runs, labels)):
        color = _COLORS[run_idx % len(_COLORS)]
        for i, player in enumerate(run.players):
            style = _PLAYER_STYLES[i % len(_PLAYER_STYLES)]
            name = f"{label} car {i + 1}" if run.num_players > 1 else label
            ax_long.plot(run.t, player["ax"], style, color=color, lw=1.4, label=name)
            combined = np.hypot(player["ax"], player["ay"])
            ax_comb.plot(run.t, combined, style, color=color, lw=1.4, label=name)
            ax_limit = _envelope(run.meta, i, "a_x_max_table", player["V"])
            if ax_limit is not None:
                ax_long.plot(run.t, ax_limit, style, color=color, lw=0.8, alpha=0.5)
            rho = _envelope(run.meta, i, "rho_table", player["V"])
            if rho is not None:
                ax_comb.plot(run.t, rho, style, color=color, lw=0.8, alpha=0.5)
    ax_long.set_ylabel("a_x [m/s^2]")
    ax_comb.set_ylabel("|a| [m/s^2]")
    ax_comb.set_xlabel("t [s]")
    ax_long.legend(loc="best", fontsize=8)
    for ax in (ax_long, ax_comb):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def _render_convergence(spec: PlotSpec, out: Path) -> Path:
    metas = [load_metadata(p) for p in spec.inputs]
    labels = _labels_for(spec, metas)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for idx, (meta, label) in enumerate(zip(metas, labels)):
        norms = np.asarray(meta["state_change_norms"], dtype=float)
        ax.semilogy(
            np.arange(1, norms.size + 1),
            norms,
            color=_COLORS[idx % len(_COLORS)],
            lw=1.6,
            label=label,
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("max state-trajectory change")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render(spec: PlotSpec) -> Path:
    """Render the requested figure; returns the written path."""
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if spec.kind == "trajectory":
        return _render_trajectory(spec, out)
    if spec.kind == "gg-usage":
        return _render_gg_usage(spec, out)
    return _render_convergence(spec, out)
