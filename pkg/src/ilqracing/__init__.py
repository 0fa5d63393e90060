"""Iterative LQ dynamic-game trajectory planning for racing.

The library solves N-player discrete-time dynamic games by repeatedly
linearizing the dynamics and quadratizing each player's cost, solving the
resulting stage-wise LQ game analytically in either the feedback or the
open-loop information structure, and rolling the strategies through the
nonlinear model with a damped forward pass. A sequential single-player
baseline and a best-response certificate harness support side-by-side
comparison of the solution concepts.
"""

from .costs import (
    CostParams,
    project_psd,
    quadratize_stage,
    quadratize_terminal,
    stage_cost,
    stage_cost_derivatives,
    terminal_cost,
)
from .dynamics import (
    ClampDiagnostics,
    DynamicsSingularityError,
    GGDiamond,
    JointState,
    LqApproximation,
    PlayerInput,
    PlayerState,
    V_MIN,
    linearize_discrete,
    rk4_step,
    rk4_step_jacobians,
    rollout,
    step,
    vehicle_derivative,
    vehicle_jacobian_input,
    vehicle_jacobian_state,
)
from .game import (
    EgoPredictionGame,
    FrozenInputsGame,
    GameProblem,
    LinearQuadraticGame,
    RacingGame,
    constant_vn_prediction,
)
from .lq_game import (
    AffineLqrSolution,
    SolverSingularityError,
    StrategySet,
    ValueRecursion,
    affine_lqr,
    feedback_backward,
    lq_rollout,
    lq_rollout_inputs,
    lq_total_cost,
    openloop_backward,
    riccati_lqr,
    solve_feedback_lq,
    solve_openloop_lq,
)
from .scenario import (
    ExportContext,
    PlayerSpec,
    RacingScenario,
    ScenarioValidationError,
    export,
    load_scenario,
    parse_scenario,
    run,
    save_scenario,
)
from .solver import (
    ForwardPassError,
    GapReport,
    MODE_FEEDBACK,
    MODE_ILQR,
    MODE_OPEN_LOOP,
    SolveError,
    SolveReport,
    SolverSettings,
    best_response_gap,
    evaluate_costs,
    forward_pass,
    initial_trajectory,
    quadratize_trajectory,
    solve,
    zero_inputs,
)
from .track import Track, TrackDomainError, TrackSegment
from .trajectory import GameTrajectory

__version__ = "0.1.0"
