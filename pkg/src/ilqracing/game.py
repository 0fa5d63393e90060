"""Game problem interface plus the concrete games the solver runs on.

A game problem bundles a discrete step map, its linearization, and
per-player stage/terminal costs with their quadratization. Three
implementations cover the solver's needs: the racing game itself, an
exactly linear-quadratic game (tests, certificates), and single-player
reductions used by the sequential baseline and the best-response check.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from . import costs as racing_costs
from . import dynamics
from .dynamics import GGDiamond, LqApproximation, PLAYER_INPUT_DIM, PLAYER_STATE_DIM
from .track import Track

FloatArray = np.ndarray


class GameProblem(Protocol):
    """What the iterative solver needs from a game."""

    @property
    def num_players(self) -> int: ...

    @property
    def state_dim(self) -> int: ...

    @property
    def input_dims(self) -> list[int]: ...

    def step(self, k: int, x: FloatArray, us: Sequence[FloatArray]) -> FloatArray: ...

    def linearize(
        self, states: FloatArray, inputs: Sequence[FloatArray]
    ) -> tuple[FloatArray, list[FloatArray]]: ...

    def stage_cost(self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]) -> float: ...

    def terminal_cost(self, i: int, x: FloatArray) -> float: ...

    def quadratize_stage(
        self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]
    ) -> tuple[FloatArray, FloatArray, list[FloatArray], list[FloatArray]]: ...

    def quadratize_terminal(self, i: int, x: FloatArray) -> tuple[FloatArray, FloatArray]: ...


class RacingGame:
    """N-car racing game on a track: decoupled dynamics, coupled costs."""

    def __init__(
        self,
        track: Track,
        params: Sequence[racing_costs.CostParams],
        gg: Sequence[GGDiamond],
        dt: float,
    ):
        if len(params) != len(gg) or len(params) < 1:
            raise ValueError("need one CostParams and one GGDiamond per player")
        if dt <= 0.0:
            raise ValueError("dt must be > 0")
        self.track = track
        self.params = list(params)
        self.gg = list(gg)
        self.dt = float(dt)

    @property
    def num_players(self) -> int:
        return len(self.params)

    @property
    def state_dim(self) -> int:
        return PLAYER_STATE_DIM * self.num_players

    @property
    def input_dims(self) -> list[int]:
        return [PLAYER_INPUT_DIM] * self.num_players

    def step(self, k: int, x: FloatArray, us: Sequence[FloatArray]) -> FloatArray:
        return dynamics.step(x, us, self.track, self.dt)

    def linearize(
        self, states: FloatArray, inputs: Sequence[FloatArray]
    ) -> tuple[FloatArray, list[FloatArray]]:
        return dynamics.linearize_discrete(states, inputs, self.track, self.dt)

    def stage_cost(self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]) -> float:
        return racing_costs.stage_cost(i, x, us[i], self.params[i], self.gg[i], self.track)

    def terminal_cost(self, i: int, x: FloatArray) -> float:
        return racing_costs.terminal_cost(i, x, self.params[i])

    def quadratize_stage(
        self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]
    ) -> tuple[FloatArray, FloatArray, list[FloatArray], list[FloatArray]]:
        Q, q, R_own, r_own = racing_costs.quadratize_stage(
            i, x, us[i], self.params[i], self.gg[i], self.track
        )
        # Cross-player input terms are exactly zero in this cost design.
        Rs = [
            R_own if j == i else np.zeros((PLAYER_INPUT_DIM, PLAYER_INPUT_DIM))
            for j in range(self.num_players)
        ]
        rs = [r_own if j == i else np.zeros(PLAYER_INPUT_DIM) for j in range(self.num_players)]
        return Q, q, Rs, rs

    def quadratize_terminal(self, i: int, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        return racing_costs.quadratize_terminal(i, x, self.params[i])


class LinearQuadraticGame:
    """A game that is exactly its own LQ approximation.

    States and inputs are interpreted in absolute coordinates; the stored
    stage data defines both the (linear) dynamics and the (quadratic)
    costs, so quadratizing at any nominal reproduces the game exactly.
    """

    def __init__(self, lq: LqApproximation, validate: bool = True):
        if validate:
            lq.validate()
        self.lq = lq

    @property
    def num_players(self) -> int:
        return self.lq.num_players

    @property
    def state_dim(self) -> int:
        return self.lq.state_dim

    @property
    def input_dims(self) -> list[int]:
        return self.lq.input_dims

    def step(self, k: int, x: FloatArray, us: Sequence[FloatArray]) -> FloatArray:
        out = self.lq.A[k] @ x
        for i in range(self.num_players):
            out = out + self.lq.B[i][k] @ np.asarray(us[i], dtype=float)
        return out

    def linearize(
        self, states: FloatArray, inputs: Sequence[FloatArray]
    ) -> tuple[FloatArray, list[FloatArray]]:
        return self.lq.A.copy(), [Bi.copy() for Bi in self.lq.B]

    def stage_cost(self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]) -> float:
        total = 0.5 * x @ self.lq.Q[i][k] @ x + self.lq.q[i][k] @ x
        for j in range(self.num_players):
            u = np.asarray(us[j], dtype=float)
            total += 0.5 * u @ self.lq.R[i][j][k] @ u + self.lq.r[i][j][k] @ u
        return float(total)

    def terminal_cost(self, i: int, x: FloatArray) -> float:
        K = self.lq.horizon
        return float(0.5 * x @ self.lq.Q[i][K] @ x + self.lq.q[i][K] @ x)

    def quadratize_stage(
        self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]
    ) -> tuple[FloatArray, FloatArray, list[FloatArray], list[FloatArray]]:
        Q = self.lq.Q[i][k].copy()
        q = self.lq.Q[i][k] @ x + self.lq.q[i][k]
        Rs = [self.lq.R[i][j][k].copy() for j in range(self.num_players)]
        rs = [
            self.lq.R[i][j][k] @ np.asarray(us[j], dtype=float) + self.lq.r[i][j][k]
            for j in range(self.num_players)
        ]
        return Q, q, Rs, rs

    def quadratize_terminal(self, i: int, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        K = self.lq.horizon
        return self.lq.Q[i][K].copy(), self.lq.Q[i][K] @ x + self.lq.q[i][K]


def constant_vn_prediction(x0: FloatArray, track: Track, dt: float, horizon: int) -> FloatArray:
    """Opponent prediction holding speed, lateral offset, and heading.

    Progress integrates ds/dt = V cos(chi) / (1 - n kappa(s)) by RK4 with
    the frozen V, n, chi; accelerations are pinned to zero. On a straight
    track with chi = 0 this is the exact constant-velocity extrapolation.
    """
    x0 = np.asarray(x0, dtype=float)
    s, v, n, chi = x0[dynamics.S], x0[dynamics.V], x0[dynamics.N_LAT], x0[dynamics.CHI]
    states = np.zeros((horizon + 1, PLAYER_STATE_DIM))
    states[:, dynamics.V] = v
    states[:, dynamics.N_LAT] = n
    states[:, dynamics.CHI] = chi
    speed = v * np.cos(chi)

    def s_rate(si: float) -> float:
        return speed / (1.0 - n * track.curvature_at(si))

    states[0, dynamics.S] = s
    for k in range(horizon):
        k1 = s_rate(s)
        k2 = s_rate(s + 0.5 * dt * k1)
        k3 = s_rate(s + 0.5 * dt * k2)
        k4 = s_rate(s + dt * k3)
        s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1, dynamics.S] = s
    return states


class EgoPredictionGame:
    """Single-player view of a racing game against fixed opponent predictions.

    The state is the ego's six components; opponent states at each stage
    enter the ego's cost as known parameters. With zero opponents this is
    numerically identical to the one-player racing game.
    """

    def __init__(
        self,
        base: RacingGame,
        ego: int,
        predictions: Sequence[FloatArray],
    ):
        if not 0 <= ego < base.num_players:
            raise ValueError(f"ego index {ego} out of range")
        if len(predictions) != base.num_players - 1:
            raise ValueError("need one prediction per opponent")
        self.base = base
        self.ego = ego
        self.predictions = [np.asarray(p, dtype=float) for p in predictions]
        self._opponents = [j for j in range(base.num_players) if j != ego]

    @property
    def num_players(self) -> int:
        return 1

    @property
    def state_dim(self) -> int:
        return PLAYER_STATE_DIM

    @property
    def input_dims(self) -> list[int]:
        return [PLAYER_INPUT_DIM]

    def _joint(self, k: int, x: FloatArray) -> FloatArray:
        joint = np.zeros(self.base.state_dim)
        joint[PLAYER_STATE_DIM * self.ego : PLAYER_STATE_DIM * (self.ego + 1)] = x
        for p, j in zip(self.predictions, self._opponents):
            joint[PLAYER_STATE_DIM * j : PLAYER_STATE_DIM * (j + 1)] = p[k]
        return joint

    def step(self, k: int, x: FloatArray, us: Sequence[FloatArray]) -> FloatArray:
        return dynamics.step(x, us, self.base.track, self.base.dt)

    def linearize(
        self, states: FloatArray, inputs: Sequence[FloatArray]
    ) -> tuple[FloatArray, list[FloatArray]]:
        return dynamics.linearize_discrete(states, inputs, self.base.track, self.base.dt)

    def stage_cost(self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]) -> float:
        return racing_costs.stage_cost(
            self.ego,
            self._joint(k, x),
            us[0],
            self.base.params[self.ego],
            self.base.gg[self.ego],
            self.base.track,
        )

    def terminal_cost(self, i: int, x: FloatArray) -> float:
        k_term = self.predictions[0].shape[0] - 1 if self.predictions else 0
        return racing_costs.terminal_cost(
            self.ego, self._joint(k_term, x), self.base.params[self.ego]
        )

    def quadratize_stage(
        self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]
    ) -> tuple[FloatArray, FloatArray, list[FloatArray], list[FloatArray]]:
        gx, Hx, gu, Hu = racing_costs.stage_cost_derivatives(
            self.ego,
            self._joint(k, x),
            us[0],
            self.base.params[self.ego],
            self.base.gg[self.ego],
            self.base.track,
        )
        blk = slice(PLAYER_STATE_DIM * self.ego, PLAYER_STATE_DIM * (self.ego + 1))
        Q = racing_costs.project_psd(Hx[blk, blk])
        return Q, gx[blk].copy(), [Hu], [gu]

    def quadratize_terminal(self, i: int, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        # Terminal gradient in the ego block: opponents' slots drop out.
        q = np.zeros(PLAYER_STATE_DIM)
        q[dynamics.S] = -1.0
        return np.zeros((PLAYER_STATE_DIM, PLAYER_STATE_DIM)), q


class FrozenInputsGame:
    """Single-player reduction: one player optimizes, opponents replay fixed inputs.

    Works on any game problem; the state stays the full joint state, the
    lone decision variable is the chosen player's input. This is the
    deviation class in which open-loop Nash conditions are checked.
    """

    def __init__(self, base: GameProblem, player: int, frozen_inputs: Sequence[FloatArray]):
        if not 0 <= player < base.num_players:
            raise ValueError(f"player index {player} out of range")
        if len(frozen_inputs) != base.num_players:
            raise ValueError("frozen_inputs must cover every player")
        self.base = base
        self.player = player
        self.frozen = [np.asarray(u, dtype=float) for u in frozen_inputs]

    @property
    def num_players(self) -> int:
        return 1

    @property
    def state_dim(self) -> int:
        return self.base.state_dim

    @property
    def input_dims(self) -> list[int]:
        return [self.base.input_dims[self.player]]

    def _full_inputs(self, k: int, u: FloatArray) -> list[FloatArray]:
        us = [self.frozen[j][k] for j in range(self.base.num_players)]
        us[self.player] = np.asarray(u, dtype=float)
        return us

    def step(self, k: int, x: FloatArray, us: Sequence[FloatArray]) -> FloatArray:
        return self.base.step(k, x, self._full_inputs(k, us[0]))

    def linearize(
        self, states: FloatArray, inputs: Sequence[FloatArray]
    ) -> tuple[FloatArray, list[FloatArray]]:
        full = [self.frozen[j] for j in range(self.base.num_players)]
        full[self.player] = np.asarray(inputs[0], dtype=float)
        A, Bs = self.base.linearize(states, full)
        return A, [Bs[self.player]]

    def stage_cost(self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]) -> float:
        return self.base.stage_cost(self.player, k, x, self._full_inputs(k, us[0]))

    def terminal_cost(self, i: int, x: FloatArray) -> float:
        return self.base.terminal_cost(self.player, x)

    def quadratize_stage(
        self, i: int, k: int, x: FloatArray, us: Sequence[FloatArray]
    ) -> tuple[FloatArray, FloatArray, list[FloatArray], list[FloatArray]]:
        Q, q, Rs, rs = self.base.quadratize_stage(self.player, k, x, self._full_inputs(k, us[0]))
        return Q, q, [Rs[self.player]], [rs[self.player]]

    def quadratize_terminal(self, i: int, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        return self.base.quadratize_terminal(self.player, x)
