"""Scenario files, validation, solver orchestration, and trajectory export.

A scenario JSON bundles the track geometry, each player's initial state,
cost parameters and acceleration envelope, the horizon, and solver
settings. Validation collects every violation before failing so a broken
file can be fixed in one pass. Exports are a CSV trajectory (17
significant digits, deterministic) plus a JSON metadata record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .costs import CostParams
from .dynamics import (
    GGDiamond,
    PLAYER_INPUT_DIM,
    PLAYER_STATE_DIM,
    PlayerState,
    V_MIN,
)
from .game import RacingGame
from .solver import (
    GapReport,
    MODE_FEEDBACK,
    MODE_ILQR,
    MODE_OPEN_LOOP,
    SolveError,
    SolveReport,
    SolverSettings,
    best_response_gap,
    solve,
    zero_inputs,
)
from .track import Track, TrackSegment

_STATE_KEYS = ("s", "V", "n", "chi", "ax", "ay")
_COST_KEYS = (
    "input_weight",
    "collision_weight",
    "wall_weight",
    "ax_limit_weight",
    "combined_limit_weight",
    "blocking_weight",
    "vehicle_length",
    "vehicle_width",
)
# CLI spelling "ilqr" is accepted for the baseline mode.
_MODE_ALIASES = {"ilqr": MODE_ILQR}


class ScenarioValidationError(ValueError):
    """All schema and invariant violations found in a scenario, at once."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {e}" for e in errors))


@dataclass(frozen=True)
class PlayerSpec:
    x0: PlayerState
    costs: CostParams
    gg: GGDiamond


@dataclass(frozen=True)
class RacingScenario:
    track: Track
    players: tuple[PlayerSpec, ...]
    horizon: int
    dt: float
    solver: SolverSettings
    initial_inputs: tuple[np.ndarray, ...] | None = None
    name: str = "scenario"

    @property
    def num_players(self) -> int:
        return len(self.players)

    def joint_x0(self) -> np.ndarray:
        return np.concatenate([p.x0.as_array() for p in self.players])

    def game(self) -> RacingGame:
        return RacingGame(
            self.track,
            [p.costs for p in self.players],
            [p.gg for p in self.players],
            self.dt,
        )

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "track": {
                "segments": [
                    {
                        "length_m": seg.length,
                        "curvature_1pm": seg.curvature,
                        "width_left_m": seg.width_left,
                        "width_right_m": seg.width_right,
                    }
                    for seg in self.track.segments
                ]
            },
            "players": [
                {
                    "x0": {
                        "s": p.x0.s,
                        "V": p.x0.V,
                        "n": p.x0.n,
                        "chi": p.x0.chi,
                        "ax": p.x0.a_x,
                        "ay": p.x0.a_y,
                    },
                    "costs": {
                        "input_weight": np.asarray(p.costs.input_weight).tolist(),
                        "collision_weight": p.costs.collision_weight,
                        "wall_weight": p.costs.wall_weight,
                        "ax_limit_weight": p.costs.ax_limit_weight,
                        "combined_limit_weight": p.costs.combined_limit_weight,
                        "blocking_weight": p.costs.blocking_weight,
                        "vehicle_length": p.costs.vehicle_length,
                        "vehicle_width": p.costs.vehicle_width,
                    },
                    "gg": {
                        "a_x_max_table": p.gg.a_x_max_table.tolist(),
                        "rho_table": p.gg.rho_table.tolist(),
                    },
                }
                for p in self.players
            ],
            "horizon": {"K": self.horizon, "dt": self.dt},
            "solver": {
                "mode": self.solver.mode,
                "eta": self.solver.eta,
                "max_iterations": self.solver.max_iterations,
                "tol": self.solver.convergence_tol,
            },
        }
        if self.initial_inputs is not None:
            data["initial_inputs"] = [u.tolist() for u in self.initial_inputs]
        return data


def _require(mapping: dict, key: str, path: str, errors: list[str]) -> Any:
    if not isinstance(mapping, dict) or key not in mapping:
        errors.append(f"{path}: missing required key {key!r}")
        return None
    return mapping[key]


def _as_float(value: Any, path: str, errors: list[str]) -> float | None:
    try:
        out = float(value)
    except (TypeError, ValueError):
        errors.append(f"{path}: expected a number, got {value!r}")
        return None
    if not np.isfinite(out):
        errors.append(f"{path}: must be finite, got {value!r}")
        return None
    return out


def _parse_track(data: Any, errors: list[str]) -> Track | None:
    segs_raw = _require(data, "segments", "track", errors)
    if not isinstance(segs_raw, list) or not segs_raw:
        if segs_raw is not None:
            errors.append("track.segments: must be a non-empty list")
        return None
    segments = []
    for idx, seg in enumerate(segs_raw):
        path = f"track.segments[{idx}]"
        length = _as_float(_require(seg, "length_m", path, errors), f"{path}.length_m", errors)
        curv = _as_float(
            _require(seg, "curvature_1pm", path, errors), f"{path}.curvature_1pm", errors
        )
        wl = _as_float(
            _require(seg, "width_left_m", path, errors), f"{path}.width_left_m", errors
        )
        wr = _as_float(
            _require(seg, "width_right_m", path, errors), f"{path}.width_right_m", errors
        )
        if None in (length, curv, wl, wr):
            return None
        try:
            segments.append(TrackSegment(length, curv, wl, wr))
        except ValueError as err:
            errors.append(f"{path}: {err}")
            return None
    try:
        return Track(segments)
    except ValueError as err:
        errors.append(f"track: {err}")
        return None


def _parse_gg(data: Any, path: str, errors: list[str]) -> GGDiamond | None:
    if not isinstance(data, dict):
        errors.append(f"{path}: must be an object")
        return None
    try:
        if "a_x_max_table" in data or "rho_table" in data:
            return GGDiamond(
                np.asarray(data["a_x_max_table"], dtype=float),
                np.asarray(data["rho_table"], dtype=float),
            )
        return GGDiamond.from_limits(
            float(data["a_x_peak"]), float(data["v_max"]), float(data["rho"])
        )
    except (KeyError, TypeError, ValueError) as err:
        errors.append(f"{path}: {err!r}" if isinstance(err, KeyError) else f"{path}: {err}")
        return None


def _parse_player(
    data: Any, idx: int, errors: list[str]
) -> tuple[PlayerState | None, CostParams | None, GGDiamond | None]:
    path = f"players[{idx}]"
    x0_raw = _require(data, "x0", path, errors)
    x0 = None
    if isinstance(x0_raw, dict):
        vals = {}
        for key in _STATE_KEYS:
            v = _as_float(_require(x0_raw, key, f"{path}.x0", errors), f"{path}.x0.{key}", errors)
            vals[key] = v
        if all(v is not None for v in vals.values()):
            x0 = PlayerState(
                s=vals["s"], V=vals["V"], n=vals["n"], chi=vals["chi"],
                a_x=vals["ax"], a_y=vals["ay"],
            )
    elif x0_raw is not None:
        errors.append(f"{path}.x0: must be an object")

    costs_raw = _require(data, "costs", path, errors)
    params = None
    if isinstance(costs_raw, dict):
        missing = [k for k in _COST_KEYS if k not in costs_raw]
        if missing:
            errors.append(f"{path}.costs: missing keys {missing}")
        else:
            weight = np.asarray(costs_raw["input_weight"], dtype=float)
            if weight.shape == (2,):
                weight = np.diag(weight)
            try:
                params = CostParams(
                    input_weight=weight,
                    collision_weight=float(costs_raw["collision_weight"]),
                    wall_weight=float(costs_raw["wall_weight"]),
                    ax_limit_weight=float(costs_raw["ax_limit_weight"]),
                    combined_limit_weight=float(costs_raw["combined_limit_weight"]),
                    blocking_weight=float(costs_raw["blocking_weight"]),
                    vehicle_length=float(costs_raw["vehicle_length"]),
                    vehicle_width=float(costs_raw["vehicle_width"]),
                )
            except (TypeError, ValueError) as err:
                errors.append(f"{path}.costs: {err}")
    elif costs_raw is not None:
        errors.append(f"{path}.costs: must be an object")

    gg_raw = _require(data, "gg", path, errors)
    gg = _parse_gg(gg_raw, f"{path}.gg", errors) if gg_raw is not None else None
    return x0, params, gg


def parse_scenario(data: dict[str, Any], name: str = "scenario") -> RacingScenario:
    """Build and fully validate a scenario from decoded JSON."""
    errors: list[str] = []
    track = _parse_track(_require(data, "track", "", errors) or {}, errors)

    players_raw = _require(data, "players", "", errors)
    specs: list[PlayerSpec] = []
    if isinstance(players_raw, list):
        if not players_raw:
            errors.append("players: at least one player is required")
        for idx, player in enumerate(players_raw):
            x0, params, gg = _parse_player(player, idx, errors)
            if x0 is not None and params is not None and gg is not None:
                specs.append(PlayerSpec(x0=x0, costs=params, gg=gg))
    elif players_raw is not None:
        errors.append("players: must be a list")

    horizon_raw = _require(data, "horizon", "", errors) or {}
    K_val = _require(horizon_raw, "K", "horizon", errors)
    dt = _as_float(_require(horizon_raw, "dt", "horizon", errors), "horizon.dt", errors)
    horizon = None
    if K_val is not None:
        if isinstance(K_val, int) and K_val >= 1:
            horizon = K_val
        else:
            errors.append(f"horizon.K: must be an integer >= 1, got {K_val!r}")
    if dt is not None and dt <= 0.0:
        errors.append(f"horizon.dt: must be > 0, got {dt}")
        dt = None

    solver_raw = _require(data, "solver", "", errors) or {}
    settings = None
    if isinstance(solver_raw, dict):
        mode = solver_raw.get("mode", MODE_FEEDBACK)
        mode = _MODE_ALIASES.get(mode, mode)
        try:
            settings = SolverSettings(
                mode=mode,
                eta=float(solver_raw.get("eta", 0.3)),
                max_iterations=int(solver_raw.get("max_iterations", 100)),
                convergence_tol=float(solver_raw.get("tol", 1e-4)),
            )
        except (TypeError, ValueError) as err:
            errors.append(f"solver: {err}")

    initial_inputs = None
    if "initial_inputs" in data and horizon is not None and specs:
        try:
            initial_inputs = tuple(
                np.asarray(u, dtype=float).reshape(horizon, PLAYER_INPUT_DIM)
                for u in data["initial_inputs"]
            )
            if len(initial_inputs) != len(specs):
                errors.append("initial_inputs: need one (K, 2) sequence per player")
                initial_inputs = None
        except (TypeError, ValueError) as err:
            errors.append(f"initial_inputs: {err}")

    # Cross-field invariants need a complete scenario.
    if track is not None and len(specs) == len(players_raw or []):
        for idx, spec in enumerate(specs):
            path = f"players[{idx}].x0"
            x0 = spec.x0
            if x0.V < V_MIN:
                errors.append(f"{path}.V: {x0.V} below the speed floor {V_MIN}")
            if not 0.0 <= x0.s <= track.total_length:
                errors.append(
                    f"{path}.s: {x0.s} outside track domain [0, {track.total_length}]"
                )
                continue
            kappa = track.curvature_at(x0.s)
            if 1.0 - x0.n * kappa <= 0.0:
                errors.append(
                    f"{path}.n: 1 - n*kappa = {1.0 - x0.n * kappa:.6g} <= 0 (singular start)"
                )
            w_left, w_right = track.width_at(x0.s)
            if not -w_right <= x0.n <= w_left:
                errors.append(
                    f"{path}.n: {x0.n} outside corridor [-{w_right}, {w_left}]"
                )

    if errors:
        raise ScenarioValidationError(errors)
    assert track is not None and settings is not None and horizon is not None and dt is not None
    return RacingScenario(
        track=track,
        players=tuple(specs),
        horizon=horizon,
        dt=dt,
        solver=settings,
        initial_inputs=initial_inputs,
        name=name,
    )


def load_scenario(path: str | Path) -> RacingScenario:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ScenarioValidationError([f"{path}: not valid JSON ({err})"]) from err
    if not isinstance(data, dict):
        raise ScenarioValidationError([f"{path}: top level must be a JSON object"])
    return parse_scenario(data, name=path.stem)


def save_scenario(scenario: RacingScenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Export.
# ---------------------------------------------------------------------------

_PLAYER_FIELDS = ("s", "V", "n", "chi", "ax", "ay", "jx", "jy")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


@dataclass
class ExportContext:
    """The scenario facts an export needs; track and envelopes are optional extras."""

    dt: float
    num_players: int
    track: Track | None = None
    gg: Sequence[GGDiamond] | None = None

    @classmethod
    def from_scenario(cls, scenario: RacingScenario) -> "ExportContext":
        return cls(
            dt=scenario.dt,
            num_players=scenario.num_players,
            track=scenario.track,
            gg=[p.gg for p in scenario.players],
        )


def export(
    report: SolveReport,
    ctx: ExportContext,
    out_dir: str | Path,
    stem: str,
    settings: SolverSettings,
    gaps: Sequence[GapReport] | None = None,
) -> tuple[Path, Path]:
    """Write `<stem>.csv` and `<stem>_meta.json` into out_dir.

    The CSV has one row per stage (K+1 rows), a time column, and eight
    columns per player; jerk cells are empty on the terminal row. Floats
    carry 17 significant digits so a re-run is byte-identical.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = report.trajectory
    n_players = ctx.num_players

    header = ["t"]
    for i in range(n_players):
        header.extend(f"p{i + 1}_{fieldname}" for fieldname in _PLAYER_FIELDS)

    lines = [",".join(header)]
    horizon = traj.horizon
    for k in range(horizon + 1):
        row = [_fmt(k * ctx.dt)]
        for i in range(n_players):
            block = traj.states[k, PLAYER_STATE_DIM * i : PLAYER_STATE_DIM * (i + 1)]
            row.extend(_fmt(v) for v in block)
            if k < horizon:
                row.extend(_fmt(v) for v in traj.inputs[i][k])
            else:
                row.extend(("", ""))
        lines.append(",".join(row))
    csv_path = out_dir / f"{stem}.csv"
    csv_path.write_text("\n".join(lines) + "\n")

    meta: dict[str, Any] = {
        "mode": settings.mode,
        "eta": settings.eta,
        "iterations": report.iterations,
        "converged": report.converged,
        "costs": [float(c) for c in (report.trajectory.costs or [])],
        "state_change_norms": [float(v) for v in report.state_change_norms],
        "cost_history": [[float(c) for c in row] for row in report.cost_history],
        "horizon": horizon,
        "dt": ctx.dt,
        "num_players": n_players,
    }
    if gaps is not None:
        meta["gaps"] = [g.gap for g in gaps]
        meta["gaps_relative"] = [g.gap_relative for g in gaps]
        meta["gaps_verified"] = [g.verified for g in gaps]
    if ctx.track is not None:
        meta["track"] = {
            "segments": [
                {
                    "length_m": seg.length,
                    "curvature_1pm": seg.curvature,
                    "width_left_m": seg.width_left,
                    "width_right_m": seg.width_right,
                }
                for seg in ctx.track.segments
            ]
        }
    if ctx.gg is not None:
        meta["gg"] = [
            {"a_x_max_table": g.a_x_max_table.tolist(), "rho_table": g.rho_table.tolist()}
            for g in ctx.gg
        ]
    meta_path = out_dir / f"{stem}_meta.json"
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return csv_path, meta_path


def run(
    scenario: RacingScenario,
    out_dir: str | Path,
    mode_override: str | None = None,
    eta_override: float | None = None,
    max_iterations_override: int | None = None,
    tol_override: float | None = None,
    certify: bool = False,
    stem: str | None = None,
) -> int:
    """Solve a scenario and export its trajectory.

    Returns the process exit status: 0 converged, 2 not converged within
    the iteration budget (trajectory still written), 1 hard solver error.
    """
    settings = scenario.solver
    if mode_override is not None:
        mode = _MODE_ALIASES.get(mode_override, mode_override)
        settings = replace(settings, mode=mode)
    if eta_override is not None:
        settings = replace(settings, eta=eta_override)
    if max_iterations_override is not None:
        settings = replace(settings, max_iterations=max_iterations_override)
    if tol_override is not None:
        settings = replace(settings, convergence_tol=tol_override)

    game = scenario.game()
    x0 = scenario.joint_x0()
    if scenario.initial_inputs is not None:
        initial = [u.copy() for u in scenario.initial_inputs]
    else:
        initial = zero_inputs(game, scenario.horizon)

    try:
        report = solve(x0, initial, game, settings)
        gaps = None
        if certify:
            gaps = [
                best_response_gap(report.trajectory, game, settings, i)
                for i in range(game.num_players)
            ]
    except SolveError as err:
        import sys

        print(f"error: {scenario.name}: {err}", file=sys.stderr)
        return 1

    export(
        report,
        ExportContext.from_scenario(scenario),
        out_dir,
        stem or f"{scenario.name}_{settings.mode}",
        settings,
        gaps=gaps,
    )
    return 0 if report.converged else 2
