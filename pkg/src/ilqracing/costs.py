"""Per-player racing costs and their exact quadratization.

The stage cost for player i is a quadratic jerk penalty plus soft
constraints: a squared exponential collision term against every opponent,
squared hinges on the track corridor, on longitudinal acceleration above
the speed-dependent limit, and on combined acceleration above the
gg-diamond radius. The terminal cost rewards own progress and penalizes
opponents' progress.

Hinge terms switch with the indicator's current truth value, so their
Hessians use the active side at the nominal point. None of the state
constraints depend on the inputs, hence mixed state-input second-order
terms vanish and cross-player input terms are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import AX, AY, CHI, GGDiamond, N_LAT, PLAYER_STATE_DIM, S, V
from .track import Track

FloatArray = np.ndarray

# Below this combined-acceleration magnitude the norm gradient is treated
# as zero; the hinge is inactive there whenever rho > 0.
_NORM_GUARD = 1e-9


@dataclass(frozen=True)
class CostParams:
    """Weights and geometry scales of one player's cost.

    input_weight is the 2x2 positive-definite jerk regularization;
    vehicle_length / vehicle_width scale the longitudinal and lateral
    distances in the collision term; blocking_weight multiplies opponents'
    terminal progress.
    """

    input_weight: FloatArray
    collision_weight: float
    wall_weight: float
    ax_limit_weight: float
    combined_limit_weight: float
    blocking_weight: float
    vehicle_length: float
    vehicle_width: float

    def __post_init__(self) -> None:
        R = np.asarray(self.input_weight, dtype=float)
        object.__setattr__(self, "input_weight", R)
        if R.shape != (2, 2) or not np.allclose(R, R.T):
            raise ValueError("input_weight must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(R).min() <= 0.0:
            raise ValueError("input_weight must be positive definite")
        for name in (
            "collision_weight",
            "wall_weight",
            "ax_limit_weight",
            "combined_limit_weight",
            "blocking_weight",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.vehicle_length <= 0.0 or self.vehicle_width <= 0.0:
            raise ValueError("vehicle_length and vehicle_width must be > 0")


def _player_slice(i: int) -> slice:
    return slice(PLAYER_STATE_DIM * i, PLAYER_STATE_DIM * (i + 1))


def stage_cost(
    i: int,
    joint: FloatArray,
    input_i: FloatArray,
    params: CostParams,
    gg: GGDiamond,
    track: Track,
) -> float:
    """Stage cost of player i at one joint state with its own input."""
    joint = np.asarray(joint, dtype=float)
    u = np.asarray(input_i, dtype=float)
    n_players = joint.size // PLAYER_STATE_DIM
    xi = joint[_player_slice(i)]
    s_i, v_i, n_i, a_x, a_y = xi[S], xi[V], xi[N_LAT], xi[AX], xi[AY]

    cost = float(u @ params.input_weight @ u)

    for j in range(n_players):
        if j == i:
            continue
        xj = joint[_player_slice(j)]
        ds = (s_i - xj[S]) / params.vehicle_length
        dn = (n_i - xj[N_LAT]) / params.vehicle_width
        cost += params.collision_weight * np.exp(2.0 * (1.0 - ds * ds - dn * dn))

    w_left, w_right = track.width_at(s_i)
    if n_i >= w_left:
        cost += params.wall_weight * (n_i - w_left) ** 2
    if n_i <= -w_right:
        cost += params.wall_weight * (n_i + w_right) ** 2

    ax_max = gg.a_x_max(v_i)
    if a_x >= ax_max:
        cost += params.ax_limit_weight * (a_x - ax_max) ** 2

    a_norm = float(np.hypot(a_x, a_y))
    rho = gg.rho(v_i)
    if a_norm >= rho:
        cost += params.combined_limit_weight * (a_norm - rho) ** 2

    return float(cost)


def terminal_cost(i: int, joint: FloatArray, params: CostParams) -> float:
    """-s_i + blocking_weight * sum of opponents' progress."""
    joint = np.asarray(joint, dtype=float)
    n_players = joint.size // PLAYER_STATE_DIM
    total = -joint[PLAYER_STATE_DIM * i + S]
    for j in range(n_players):
        if j != i:
            total += params.blocking_weight * joint[PLAYER_STATE_DIM * j + S]
    return float(total)


def stage_cost_derivatives(
    i: int,
    joint: FloatArray,
    input_i: FloatArray,
    params: CostParams,
    gg: GGDiamond,
    track: Track,
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """Exact gradient and Hessian of stage_cost.

    Returns (grad_x, hess_x, grad_u, hess_u) with respect to the full joint
    state and player i's own input; hess_x is the raw (possibly indefinite)
    Hessian, before any projection.
    """
    joint = np.asarray(joint, dtype=float)
    u = np.asarray(input_i, dtype=float)
    n_players = joint.size // PLAYER_STATE_DIM
    nx = joint.size
    gx = np.zeros(nx)
    Hx = np.zeros((nx, nx))

    off = PLAYER_STATE_DIM * i
    xi = joint[_player_slice(i)]
    s_i, v_i, n_i, a_x, a_y = xi[S], xi[V], xi[N_LAT], xi[AX], xi[AY]

    # Jerk regularization: exactly quadratic in the input.
    gu = 2.0 * params.input_weight @ u
    Hu = 2.0 * params.input_weight

    # Collision terms couple (s, n) of player i with each opponent.
    l2 = params.vehicle_length**2
    w2 = params.vehicle_width**2
    for j in range(n_players):
        if j == i:
            continue
        joff = PLAYER_STATE_DIM * j
        ds = s_i - joint[joff + S]
        dn = n_i - joint[joff + N_LAT]
        T = params.collision_weight * np.exp(2.0 * (1.0 - ds * ds / l2 - dn * dn / w2))
        idx = np.array([off + S, off + N_LAT, joff + S, joff + N_LAT])
        grad_h = np.array([-4.0 * ds / l2, -4.0 * dn / w2, 4.0 * ds / l2, 4.0 * dn / w2])
        hess_h = np.array(
            [
                [-4.0 / l2, 0.0, 4.0 / l2, 0.0],
                [0.0, -4.0 / w2, 0.0, 4.0 / w2],
                [4.0 / l2, 0.0, -4.0 / l2, 0.0],
                [0.0, 4.0 / w2, 0.0, -4.0 / w2],
            ]
        )
        gx[idx] += T * grad_h
        Hx[np.ix_(idx, idx)] += T * (np.outer(grad_h, grad_h) + hess_h)

    # Track corridor hinges; widths are piecewise constant in s.
    w_left, w_right = track.width_at(s_i)
    if n_i >= w_left:
        gx[off + N_LAT] += 2.0 * params.wall_weight * (n_i - w_left)
        Hx[off + N_LAT, off + N_LAT] += 2.0 * params.wall_weight
    if n_i <= -w_right:
        gx[off + N_LAT] += 2.0 * params.wall_weight * (n_i + w_right)
        Hx[off + N_LAT, off + N_LAT] += 2.0 * params.wall_weight

    # Longitudinal-acceleration hinge; the limit is piecewise linear in V.
    ax_max = gg.a_x_max(v_i)
    if a_x >= ax_max:
        c = params.ax_limit_weight
        viol = a_x - ax_max
        slope = gg.a_x_max_slope(v_i)
        gx[off + AX] += 2.0 * c * viol
        gx[off + V] += -2.0 * c * viol * slope
        Hx[off + AX, off + AX] += 2.0 * c
        Hx[off + AX, off + V] += -2.0 * c * slope
        Hx[off + V, off + AX] += -2.0 * c * slope
        Hx[off + V, off + V] += 2.0 * c * slope**2

    # Combined-acceleration hinge.
    a_norm = float(np.hypot(a_x, a_y))
    rho = gg.rho(v_i)
    if a_norm >= rho:
        c = params.combined_limit_weight
        viol = a_norm - rho
        rho_slope = gg.rho_slope(v_i)
        if a_norm < _NORM_GUARD:
            unit = np.zeros(2)
            norm_hess = np.zeros((2, 2))
        else:
            unit = np.array([a_x, a_y]) / a_norm
            norm_hess = (np.eye(2) - np.outer(unit, unit)) / a_norm
        idx = np.array([off + V, off + AX, off + AY])
        grad_v = np.array([-rho_slope, unit[0], unit[1]])
        gx[idx] += 2.0 * c * viol * grad_v
        hess_v = np.zeros((3, 3))
        hess_v[1:, 1:] = norm_hess
        Hx[np.ix_(idx, idx)] += 2.0 * c * (np.outer(grad_v, grad_v) + viol * hess_v)

    return gx, Hx, gu, Hu


def project_psd(H: FloatArray) -> FloatArray:
    """Nearest PSD matrix by clamping negative eigenvalues at zero.

    Eigenvalues already >= 0 are left untouched; the result is symmetric.
    """
    Hs = 0.5 * (H + H.T)
    vals, vecs = np.linalg.eigh(Hs)
    if vals[0] >= 0.0:
        return Hs
    clamped = np.clip(vals, 0.0, None)
    out = (vecs * clamped) @ vecs.T
    return 0.5 * (out + out.T)


def quadratize_stage(
    i: int,
    joint: FloatArray,
    input_i: FloatArray,
    params: CostParams,
    gg: GGDiamond,
    track: Track,
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """Second-order expansion of stage_cost at the nominal point.

    Returns (Q, q, R, r): Q is the state Hessian projected to PSD, q the
    state gradient, R = 2 * input_weight (exactly the input Hessian, PD),
    r the input gradient.
    """
    gx, Hx, gu, Hu = stage_cost_derivatives(i, joint, input_i, params, gg, track)
    return project_psd(Hx), gx, Hu, gu


def quadratize_terminal(
    i: int, joint: FloatArray, params: CostParams
) -> tuple[FloatArray, FloatArray]:
    """Expansion of the linear terminal cost: zero Hessian, constant gradient."""
    joint = np.asarray(joint, dtype=float)
    nx = joint.size
    n_players = nx // PLAYER_STATE_DIM
    q = np.zeros(nx)
    q[PLAYER_STATE_DIM * i + S] = -1.0
    for j in range(n_players):
        if j != i:
            q[PLAYER_STATE_DIM * j + S] = params.blocking_weight
    return np.zeros((nx, nx)), q
