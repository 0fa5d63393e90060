"""Nominal game trajectories: a joint state sequence plus per-player input sequences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class GameTrajectory:
    """K-stage trajectory: states (K+1, n) and one (K, m_i) input array per player.

    costs holds per-player totals once evaluated against a game; metadata
    records provenance (solver mode, iteration produced, ...).
    """

    states: np.ndarray
    inputs: list[np.ndarray]
    costs: list[float] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = [np.asarray(u, dtype=float) for u in self.inputs]
        if self.states.ndim != 2:
            raise ValueError("states must be a (K+1, n) array")
        horizon = self.states.shape[0] - 1
        for i, u in enumerate(self.inputs):
            if u.ndim != 2 or u.shape[0] != horizon:
                raise ValueError(
                    f"inputs[{i}] must have shape (K={horizon}, m), got {u.shape}"
                )

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def num_players(self) -> int:
        return len(self.inputs)

    def stage_inputs(self, k: int) -> list[np.ndarray]:
        return [u[k] for u in self.inputs]

    def resimulation_residual(self, game) -> float:
        """Max-norm defect between stored states and re-stepping the inputs."""
        worst = 0.0
        x = self.states[0]
        for k in range(self.horizon):
            x = game.step(k, x, self.stage_inputs(k))
            worst = max(worst, float(np.max(np.abs(x - self.states[k + 1]))))
            x = self.states[k + 1]
        return worst

    def copy(self) -> "GameTrajectory":
        return GameTrajectory(
            states=self.states.copy(),
            inputs=[u.copy() for u in self.inputs],
            costs=None if self.costs is None else list(self.costs),
            metadata=dict(self.metadata),
        )
