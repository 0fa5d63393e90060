"""Iterative LQ game solver: linearize, quadratize, solve, damped forward pass.

Each iteration builds the local LQ game along the nominal trajectory,
solves it in the requested equilibrium mode, and rolls the new affine
strategies through the nonlinear dynamics with step size eta applied to
the feedforward only. Convergence is declared on the max-norm change of
the state trajectory, which is a more reliable signal than cost change
near flat penalty regions.

The module also hosts the sequential baseline (ego versus a fixed
constant-velocity, constant-offset opponent prediction) and the
best-response verification harness used to certify Nash conditions in the
input-sequence deviation class.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dynamics import (
    DynamicsSingularityError,
    LqApproximation,
    PLAYER_INPUT_DIM,
    PLAYER_STATE_DIM,
)
from .game import (
    EgoPredictionGame,
    FrozenInputsGame,
    GameProblem,
    RacingGame,
    constant_vn_prediction,
)
from .track import TrackDomainError
from .lq_game import (
    FEEDBACK,
    OPEN_LOOP,
    SolverSingularityError,
    StrategySet,
    solve_feedback_lq,
    solve_openloop_lq,
)
from .trajectory import GameTrajectory

FloatArray = np.ndarray

MODE_FEEDBACK = "feedback"
MODE_OPEN_LOOP = "open-loop"
MODE_ILQR = "ilqr-baseline"
_MODES = (MODE_FEEDBACK, MODE_OPEN_LOOP, MODE_ILQR)

# The ego of the sequential baseline is always the first player.
EGO_INDEX = 0


class SolveError(RuntimeError):
    """An inner solver failure, annotated with the outer iteration."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class ForwardPassError(RuntimeError):
    """Dynamics blew up while rolling out new strategies."""

    def __init__(self, message: str, stage: int):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class SolverSettings:
    """Knobs of the outer loop.

    mode selects the equilibrium concept (or the sequential baseline);
    eta in (0, 1] damps the feedforward; convergence_tol bounds the
    max-norm state-trajectory change; gap_tol is the certificate threshold
    on relative best-response gaps.
    """

    mode: str = MODE_FEEDBACK
    eta: float = 0.3
    max_iterations: int = 100
    convergence_tol: float = 1e-4
    gap_tol: float = 1e-6
    opponent_prediction: str = "constant-vn"

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol <= 0.0:
            raise ValueError("convergence_tol must be > 0")
        if self.opponent_prediction != "constant-vn":
            raise ValueError(
                f"unsupported opponent prediction {self.opponent_prediction!r}"
            )


@dataclass
class SolveReport:
    """Everything a solve produced, including its iteration trace."""

    converged: bool
    iterations: int
    state_change_norms: list[float]
    cost_history: list[list[float]]
    trajectory: GameTrajectory
    strategies: StrategySet | None
    trajectory_history: list[GameTrajectory] = field(default_factory=list)


@dataclass
class GapReport:
    """Outcome of a unilateral best-response probe for one player.

    gap = J(trajectory) - J(best response found); verified is False when
    the inner single-player solve did not converge, in which case the gap
    is a lower bound only and must not be read as a certificate.
    """

    player: int
    gap: float
    gap_relative: float
    verified: bool
    inner_iterations: int


def evaluate_costs(game: GameProblem, traj: GameTrajectory) -> list[float]:
    """Per-player total costs along a trajectory."""
    totals = []
    for i in range(game.num_players):
        total = sum(
            game.stage_cost(i, k, traj.states[k], traj.stage_inputs(k))
            for k in range(traj.horizon)
        )
        totals.append(float(total + game.terminal_cost(i, traj.states[-1])))
    return totals


def initial_trajectory(
    game: GameProblem, x0: FloatArray, inputs: Sequence[FloatArray]
) -> GameTrajectory:
    """Roll the game dynamics under fixed input sequences."""
    inputs = [np.asarray(u, dtype=float) for u in inputs]
    horizon = inputs[0].shape[0]
    states = np.zeros((horizon + 1, game.state_dim))
    states[0] = np.asarray(x0, dtype=float)
    for k in range(horizon):
        try:
            states[k + 1] = game.step(k, states[k], [u[k] for u in inputs])
        except (DynamicsSingularityError, TrackDomainError) as err:
            raise ForwardPassError(str(err), stage=k) from err
    return GameTrajectory(states=states, inputs=inputs)


def quadratize_trajectory(game: GameProblem, traj: GameTrajectory) -> LqApproximation:
    """Assemble the local LQ game along a nominal trajectory."""
    N = game.num_players
    n = game.state_dim
    ms = game.input_dims
    horizon = traj.horizon
    A, Bs = game.linearize(traj.states, traj.inputs)
    Q = [np.zeros((horizon + 1, n, n)) for _ in range(N)]
    q = [np.zeros((horizon + 1, n)) for _ in range(N)]
    R = [[np.zeros((horizon, ms[j], ms[j])) for j in range(N)] for _ in range(N)]
    r = [[np.zeros((horizon, ms[j])) for j in range(N)] for _ in range(N)]
    for k in range(horizon):
        us_k = traj.stage_inputs(k)
        for i in range(N):
            Qk, qk, Rsk, rsk = game.quadratize_stage(i, k, traj.states[k], us_k)
            Q[i][k] = Qk
            q[i][k] = qk
            for j in range(N):
                R[i][j][k] = Rsk[j]
                r[i][j][k] = rsk[j]
    for i in range(N):
        Q[i][horizon], q[i][horizon] = game.quadratize_terminal(i, traj.states[-1])
    return LqApproximation(A=A, B=Bs, Q=Q, q=q, R=R, r=r)


def forward_pass(
    nominal: GameTrajectory,
    strategies: StrategySet,
    eta: float,
    game: GameProblem,
) -> GameTrajectory:
    """Apply affine strategies around the nominal through the true dynamics.

    u_k = u_hat_k - K_k (x_k - x_hat_k) - eta * k_k, then step the
    nonlinear model. Gains act on the deviation from the previous nominal;
    only the feedforward is damped.
    """
    horizon = nominal.horizon
    states = np.empty_like(nominal.states)
    states[0] = nominal.states[0]
    inputs = [np.empty_like(u) for u in nominal.inputs]
    for k in range(horizon):
        dx = states[k] - nominal.states[k]
        us_k = []
        for i in range(len(inputs)):
            u = (
                nominal.inputs[i][k]
                - strategies.gains[i][k] @ dx
                - eta * strategies.feedforwards[i][k]
            )
            inputs[i][k] = u
            us_k.append(u)
        try:
            states[k + 1] = game.step(k, states[k], us_k)
        except (DynamicsSingularityError, TrackDomainError) as err:
            raise ForwardPassError(str(err), stage=k) from err
    return GameTrajectory(states=states, inputs=inputs)


def _iterate(
    x0: FloatArray,
    initial_inputs: Sequence[FloatArray],
    game: GameProblem,
    settings: SolverSettings,
    mode: str,
) -> SolveReport:
    """Common linearize / quadratize / solve / roll loop for both game modes."""
    try:
        nominal = initial_trajectory(game, x0, initial_inputs)
    except ForwardPassError as err:
        raise SolveError(str(err), iteration=0) from err
    nominal.costs = evaluate_costs(game, nominal)
    nominal.metadata.update(iteration=0, mode=mode)
    history = [nominal]
    change_norms: list[float] = []
    cost_history = [list(nominal.costs)]
    strategies: StrategySet | None = None
    converged = False
    iterations = 0

    for it in range(1, settings.max_iterations + 1):
        iterations = it
        try:
            lq = quadratize_trajectory(game, nominal)
            if mode == MODE_OPEN_LOOP:
                strategies = solve_openloop_lq(lq, np.zeros(game.state_dim))
            else:
                strategies = solve_feedback_lq(lq)
            new = forward_pass(nominal, strategies, settings.eta, game)
        except (
            SolverSingularityError,
            ForwardPassError,
            DynamicsSingularityError,
            TrackDomainError,
        ) as err:
            raise SolveError(str(err), iteration=it) from err
        new.costs = evaluate_costs(game, new)
        new.metadata.update(iteration=it, mode=mode)
        change = float(np.max(np.abs(new.states - nominal.states)))
        change_norms.append(change)
        cost_history.append(list(new.costs))
        history.append(new)
        nominal = new
        if change < settings.convergence_tol:
            converged = True
            break

    return SolveReport(
        converged=converged,
        iterations=iterations,
        state_change_norms=change_norms,
        cost_history=cost_history,
        trajectory=nominal,
        strategies=strategies,
        trajectory_history=history,
    )


def _solve_baseline(
    x0: FloatArray,
    initial_inputs: Sequence[FloatArray],
    game: RacingGame,
    settings: SolverSettings,
) -> SolveReport:
    """Sequential comparator: opponents follow a fixed extrapolation, the ego plans alone."""
    if not isinstance(game, RacingGame):
        raise ValueError("the sequential baseline requires a racing game")
    x0 = np.asarray(x0, dtype=float)
    horizon = np.asarray(initial_inputs[EGO_INDEX]).shape[0]
    opponents = [j for j in range(game.num_players) if j != EGO_INDEX]
    predictions = [
        constant_vn_prediction(
            x0[PLAYER_STATE_DIM * j : PLAYER_STATE_DIM * (j + 1)],
            game.track,
            game.dt,
            horizon,
        )
        for j in opponents
    ]
    ego_game = EgoPredictionGame(game, EGO_INDEX, predictions)
    ego_x0 = x0[PLAYER_STATE_DIM * EGO_INDEX : PLAYER_STATE_DIM * (EGO_INDEX + 1)]
    inner = _iterate(
        ego_x0, [initial_inputs[EGO_INDEX]], ego_game, settings, MODE_FEEDBACK
    )

    def lift(ego_traj: GameTrajectory, iteration: int) -> GameTrajectory:
        states = np.zeros((horizon + 1, game.state_dim))
        states[:, PLAYER_STATE_DIM * EGO_INDEX : PLAYER_STATE_DIM * (EGO_INDEX + 1)] = (
            ego_traj.states
        )
        for pred, j in zip(predictions, opponents):
            states[:, PLAYER_STATE_DIM * j : PLAYER_STATE_DIM * (j + 1)] = pred
        inputs = [np.zeros((horizon, PLAYER_INPUT_DIM)) for _ in range(game.num_players)]
        inputs[EGO_INDEX] = ego_traj.inputs[0].copy()
        joint = GameTrajectory(states=states, inputs=inputs)
        joint.costs = evaluate_costs(game, joint)
        joint.metadata.update(iteration=iteration, mode=MODE_ILQR)
        return joint

    history = [lift(t, i) for i, t in enumerate(inner.trajectory_history)]
    final = history[-1]

    # Embed the ego gains in joint-sized strategies; opponents hold zero laws.
    strategies = None
    if inner.strategies is not None:
        gains = [
            np.zeros((horizon, PLAYER_INPUT_DIM, game.state_dim))
            for _ in range(game.num_players)
        ]
        ffs = [np.zeros((horizon, PLAYER_INPUT_DIM)) for _ in range(game.num_players)]
        ego_cols = slice(PLAYER_STATE_DIM * EGO_INDEX, PLAYER_STATE_DIM * (EGO_INDEX + 1))
        gains[EGO_INDEX][:, :, ego_cols] = inner.strategies.gains[0]
        ffs[EGO_INDEX] = inner.strategies.feedforwards[0].copy()
        strategies = StrategySet(gains=gains, feedforwards=ffs, mode=FEEDBACK)

    return SolveReport(
        converged=inner.converged,
        iterations=inner.iterations,
        state_change_norms=inner.state_change_norms,
        cost_history=[t.costs for t in history],
        trajectory=final,
        strategies=strategies,
        trajectory_history=history,
    )


def solve(
    x0: FloatArray,
    initial_inputs: Sequence[FloatArray],
    game: GameProblem,
    settings: SolverSettings,
) -> SolveReport:
    """Run the iterative LQ game solver in the configured mode.

    Non-convergence within max_iterations is reported, not raised; hard
    failures (singular stage systems, dynamics blow-ups) raise SolveError.
    """
    if settings.mode == MODE_ILQR:
        return _solve_baseline(x0, initial_inputs, game, settings)
    mode = MODE_OPEN_LOOP if settings.mode == MODE_OPEN_LOOP else MODE_FEEDBACK
    return _iterate(x0, initial_inputs, game, settings, mode)


def zero_inputs(game: GameProblem, horizon: int) -> list[FloatArray]:
    """The default initialization: all-zero input sequences."""
    return [np.zeros((horizon, m)) for m in game.input_dims]


def best_response_gap(
    trajectory: GameTrajectory,
    game: GameProblem,
    settings: SolverSettings,
    player: int,
) -> GapReport:
    """Probe the Nash condition for one player by unilateral re-optimization.

    Opponents' input sequences are frozen and the player re-solves its own
    trajectory with a single-player iterative LQ solve started from the
    trajectory under test. The reported gap is the cost improvement of the
    best dynamically consistent candidate encountered, which is
    non-negative by construction.
    """
    j_nominal = evaluate_costs(game, trajectory)[player]
    frozen = FrozenInputsGame(game, player, trajectory.inputs)
    inner_settings = replace(settings, mode=MODE_FEEDBACK)
    inner = _iterate(
        trajectory.states[0],
        [trajectory.inputs[player]],
        frozen,
        inner_settings,
        MODE_FEEDBACK,
    )
    best = min(c[0] for c in inner.cost_history)
    gap = j_nominal - best
    return GapReport(
        player=player,
        gap=float(gap),
        gap_relative=float(gap / (1.0 + abs(j_nominal))),
        verified=inner.converged,
        inner_iterations=inner.iterations,
    )
