"""Curvilinear point-mass vehicle model, RK4 discretization, and exact step-map Jacobians.

Per-player state is [s, V, n, chi, a_x, a_y]:
progress along the reference line, speed, lateral offset (positive left),
heading relative to the reference line, and longitudinal/lateral
acceleration. Inputs are the jerks [j_x, j_y]. Players are dynamically
decoupled; they interact only through costs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .track import Track
from .trajectory import GameTrajectory

# State / input slot indices for one player.
S, V, N_LAT, CHI, AX, AY = range(6)
JX, JY = range(2)
PLAYER_STATE_DIM = 6
PLAYER_INPUT_DIM = 2

# Speed floor guarding the 1/V term. Racing scenarios run far above it.
V_MIN = 0.1

FloatArray = np.ndarray


class DynamicsSingularityError(RuntimeError):
    """1 - n*kappa(s) <= 0: the state left the valid curvilinear chart."""

    def __init__(self, message: str, stage: int | None = None):
        super().__init__(message)
        self.stage = stage


@dataclass
class ClampDiagnostics:
    """Counts speed-floor clamps applied during dynamics evaluations."""

    v_floor_hits: int = 0

    def count(self) -> None:
        self.v_floor_hits += 1


@dataclass(frozen=True)
class PlayerState:
    s: float = 0.0
    V: float = 0.0
    n: float = 0.0
    chi: float = 0.0
    a_x: float = 0.0
    a_y: float = 0.0

    def as_array(self) -> FloatArray:
        return np.array([self.s, self.V, self.n, self.chi, self.a_x, self.a_y])

    @classmethod
    def from_array(cls, x: FloatArray) -> "PlayerState":
        return cls(*(float(v) for v in x))


@dataclass(frozen=True)
class PlayerInput:
    j_x: float = 0.0
    j_y: float = 0.0

    def as_array(self) -> FloatArray:
        return np.array([self.j_x, self.j_y])


@dataclass(frozen=True)
class JointState:
    """Ordered stack of N player states; joint dimension is 6N."""

    players: tuple[PlayerState, ...]

    def __post_init__(self) -> None:
        if len(self.players) < 1:
            raise ValueError("a game needs at least one player")

    @property
    def num_players(self) -> int:
        return len(self.players)

    def as_array(self) -> FloatArray:
        return np.concatenate([p.as_array() for p in self.players])

    @classmethod
    def from_array(cls, x: FloatArray) -> "JointState":
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size % PLAYER_STATE_DIM != 0:
            raise ValueError(f"joint state length must be a multiple of 6, got {x.shape}")
        n = x.size // PLAYER_STATE_DIM
        return cls(tuple(PlayerState.from_array(x[6 * i : 6 * i + 6]) for i in range(n)))


class GGDiamond:
    """Velocity-dependent acceleration envelope, diamond-shaped.

    Two piecewise-linear tables over speed: the maximum positive
    longitudinal acceleration (non-increasing, 0 at the top speed) and the
    combined-acceleration radius. Queries clamp outside the knot range, and
    slopes use the interval to the right of a knot.
    """

    def __init__(self, a_x_max_table: FloatArray, rho_table: FloatArray):
        self._ax = self._check_table("a_x_max_table", a_x_max_table)
        self._rho = self._check_table("rho_table", rho_table)
        ax_vals = self._ax[:, 1]
        if np.any(np.diff(ax_vals) > 0.0):
            raise ValueError("a_x_max_table must be non-increasing in V")
        if ax_vals[-1] != 0.0:
            raise ValueError("a_x_max_table must reach 0 at its top speed")

    @staticmethod
    def _check_table(name: str, table: FloatArray) -> FloatArray:
        t = np.asarray(table, dtype=float)
        if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] < 1:
            raise ValueError(f"{name} must have shape (M, 2) with M >= 1")
        if np.any(np.diff(t[:, 0]) <= 0.0):
            raise ValueError(f"{name} speeds must be strictly increasing")
        if np.any(t[:, 1] < 0.0):
            raise ValueError(f"{name} values must be non-negative")
        return t

    @classmethod
    def from_limits(cls, a_x_peak: float, v_max: float, rho: float) -> "GGDiamond":
        """Default tables: a_x_max falls linearly from a_x_peak to 0 at v_max; rho constant."""
        if a_x_peak <= 0.0 or v_max <= 0.0 or rho <= 0.0:
            raise ValueError("a_x_peak, v_max, rho must all be > 0")
        return cls(np.array([[0.0, a_x_peak], [v_max, 0.0]]), np.array([[0.0, rho]]))

    @property
    def a_x_max_table(self) -> FloatArray:
        return self._ax.copy()

    @property
    def rho_table(self) -> FloatArray:
        return self._rho.copy()

    @property
    def v_max(self) -> float:
        return float(self._ax[-1, 0])

    @staticmethod
    def _interp(table: FloatArray, v: float) -> float:
        return float(np.interp(v, table[:, 0], table[:, 1]))

    @staticmethod
    def _slope(table: FloatArray, v: float) -> float:
        knots = table[:, 0]
        if table.shape[0] < 2 or v < knots[0] or v >= knots[-1]:
            return 0.0
        idx = int(np.searchsorted(knots, v, side="right")) - 1
        dv = knots[idx + 1] - knots[idx]
        return float((table[idx + 1, 1] - table[idx, 1]) / dv)

    def a_x_max(self, v: float) -> float:
        return self._interp(self._ax, v)

    def a_x_max_slope(self, v: float) -> float:
        return self._slope(self._ax, v)

    def rho(self, v: float) -> float:
        return self._interp(self._rho, v)

    def rho_slope(self, v: float) -> float:
        return self._slope(self._rho, v)


# ---------------------------------------------------------------------------
# Continuous-time vehicle model and its Jacobians.
# ---------------------------------------------------------------------------


def vehicle_derivative(
    x: FloatArray,
    u: FloatArray,
    track: Track,
    diag: ClampDiagnostics | None = None,
) -> FloatArray:
    """Time derivative of one player's state.

    Raises DynamicsSingularityError when 1 - n*kappa(s) <= 0. Speeds below
    V_MIN are clamped for evaluation (counted in diag when given).
    """
    s, v, n, chi, a_x, a_y = x
    if v < V_MIN:
        v = V_MIN
        if diag is not None:
            diag.count()
    kappa = track.curvature_at(s)
    denom = 1.0 - n * kappa
    if denom <= 0.0:
        raise DynamicsSingularityError(
            f"1 - n*kappa = {denom:.6g} <= 0 at s={s:.6g}, n={n:.6g}"
        )
    s_dot = v * np.cos(chi) / denom
    return np.array(
        [
            s_dot,
            a_x,
            v * np.sin(chi),
            a_y / v - kappa * s_dot,
            u[JX],
            u[JY],
        ]
    )


def vehicle_jacobian_state(x: FloatArray, u: FloatArray, track: Track) -> FloatArray:
    """d(vehicle_derivative)/d(state), exact within a curvature segment.

    Curvature is piecewise constant, so the partial with respect to s is
    zero away from segment joints. In the speed-floor region the partials
    with respect to V are zero, matching the clamped evaluation.
    """
    s, v, n, chi, a_x, a_y = x
    clamped = v < V_MIN
    if clamped:
        v = V_MIN
    kappa = track.curvature_at(s)
    denom = 1.0 - n * kappa
    if denom <= 0.0:
        raise DynamicsSingularityError(
            f"1 - n*kappa = {denom:.6g} <= 0 at s={s:.6g}, n={n:.6g}"
        )
    c, sn = np.cos(chi), np.sin(chi)
    J = np.zeros((6, 6))
    J[S, V] = c / denom
    J[S, N_LAT] = v * c * kappa / denom**2
    J[S, CHI] = -v * sn / denom
    J[V, AX] = 1.0
    J[N_LAT, V] = sn
    J[N_LAT, CHI] = v * c
    J[CHI, V] = -a_y / v**2 - kappa * c / denom
    J[CHI, N_LAT] = -(kappa**2) * v * c / denom**2
    J[CHI, CHI] = kappa * v * sn / denom
    J[CHI, AY] = 1.0 / v
    if clamped:
        J[:, V] = 0.0
    return J


_B_CONT = np.zeros((6, 2))
_B_CONT[AX, JX] = 1.0
_B_CONT[AY, JY] = 1.0


def vehicle_jacobian_input() -> FloatArray:
    """d(vehicle_derivative)/d(input): jerks drive the acceleration states."""
    return _B_CONT.copy()


# ---------------------------------------------------------------------------
# Generic RK4 step and differentiate-through-RK4 Jacobians.
# ---------------------------------------------------------------------------


def rk4_step(
    f: Callable[[FloatArray, FloatArray], FloatArray],
    x: FloatArray,
    u: FloatArray,
    dt: float,
) -> FloatArray:
    """One classical RK4 step with the input held constant."""
    k1 = f(x, u)
    k2 = f(x + 0.5 * dt * k1, u)
    k3 = f(x + 0.5 * dt * k2, u)
    k4 = f(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_jacobians(
    f: Callable[[FloatArray, FloatArray], FloatArray],
    dfdx: Callable[[FloatArray, FloatArray], FloatArray],
    dfdu: Callable[[FloatArray, FloatArray], FloatArray],
    x: FloatArray,
    u: FloatArray,
    dt: float,
) -> tuple[FloatArray, FloatArray]:
    """Exact Jacobians of the RK4 step map, composed from the continuous Jacobians."""
    n = x.size
    k1 = f(x, u)
    x2 = x + 0.5 * dt * k1
    k2 = f(x2, u)
    x3 = x + 0.5 * dt * k2
    k3 = f(x3, u)
    x4 = x + dt * k3

    A1, B1 = dfdx(x, u), dfdu(x, u)
    A2, B2 = dfdx(x2, u), dfdu(x2, u)
    A3, B3 = dfdx(x3, u), dfdu(x3, u)
    A4, B4 = dfdx(x4, u), dfdu(x4, u)

    I = np.eye(n)
    dk1_dx = A1
    dk2_dx = A2 @ (I + 0.5 * dt * dk1_dx)
    dk3_dx = A3 @ (I + 0.5 * dt * dk2_dx)
    dk4_dx = A4 @ (I + dt * dk3_dx)
    A = I + (dt / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx)

    dk1_du = B1
    dk2_du = B2 + 0.5 * dt * (A2 @ dk1_du)
    dk3_du = B3 + 0.5 * dt * (A3 @ dk2_du)
    dk4_du = B4 + dt * (A4 @ dk3_du)
    B = (dt / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du)
    return A, B


# ---------------------------------------------------------------------------
# Joint-state stepping, rollout, linearization.
# ---------------------------------------------------------------------------


def _num_players(joint: FloatArray) -> int:
    if joint.ndim != 1 or joint.size % PLAYER_STATE_DIM != 0:
        raise ValueError(f"joint state must be a flat multiple of 6, got {joint.shape}")
    return joint.size // PLAYER_STATE_DIM


def step(
    joint: FloatArray,
    inputs: Sequence[FloatArray],
    track: Track,
    dt: float,
    diag: ClampDiagnostics | None = None,
) -> FloatArray:
    """RK4 step of the stacked dynamics; players evolve independently."""
    joint = np.asarray(joint, dtype=float)
    n_players = _num_players(joint)
    if len(inputs) != n_players:
        raise ValueError(f"expected {n_players} inputs, got {len(inputs)}")
    out = np.empty_like(joint)
    f = lambda x, u: vehicle_derivative(x, u, track, diag)
    for i in range(n_players):
        blk = slice(6 * i, 6 * i + 6)
        out[blk] = rk4_step(f, joint[blk], np.asarray(inputs[i], dtype=float), dt)
    return out


def rollout(
    x0: FloatArray,
    inputs: Sequence[FloatArray],
    track: Track,
    dt: float,
    substeps: int = 1,
    diag: ClampDiagnostics | None = None,
) -> GameTrajectory:
    """Simulate K stages from x0; inputs[i] has shape (K, 2).

    substeps > 1 subdivides each stage into equal RK4 steps with the input
    held, for accuracy studies; the game itself always uses substeps=1.
    """
    x0 = np.asarray(x0, dtype=float)
    n_players = _num_players(x0)
    inputs = [np.asarray(ui, dtype=float).reshape(-1, PLAYER_INPUT_DIM) for ui in inputs]
    if len(inputs) != n_players:
        raise ValueError(f"expected {n_players} input sequences, got {len(inputs)}")
    horizon = inputs[0].shape[0]
    if any(ui.shape[0] != horizon for ui in inputs):
        raise ValueError("all players' input sequences must share the same length")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")

    states = np.empty((horizon + 1, x0.size))
    states[0] = x0
    h = dt / substeps
    for k in range(horizon):
        us_k = [ui[k] for ui in inputs]
        x = states[k]
        try:
            for _ in range(substeps):
                x = step(x, us_k, track, h, diag)
        except DynamicsSingularityError as err:
            raise DynamicsSingularityError(f"stage {k}: {err}", stage=k) from err
        states[k + 1] = x
    return GameTrajectory(states=states, inputs=inputs)


def linearize_discrete(
    states: FloatArray,
    inputs: Sequence[FloatArray],
    track: Track,
    dt: float,
) -> tuple[FloatArray, list[FloatArray]]:
    """Jacobians of the RK4 step map along a nominal trajectory.

    Returns A with shape (K, 6N, 6N) and one (K, 6N, 2) array per player.
    A is block-diagonal per player and each B^i is nonzero only in player
    i's rows, because the players' dynamics are decoupled.
    """
    states = np.asarray(states, dtype=float)
    n_players = states.shape[1] // PLAYER_STATE_DIM
    horizon = states.shape[0] - 1
    if horizon < 1:
        raise ValueError("need at least one stage to linearize")
    nx = states.shape[1]
    A = np.zeros((horizon, nx, nx))
    Bs = [np.zeros((horizon, nx, PLAYER_INPUT_DIM)) for _ in range(n_players)]
    f = lambda x, u: vehicle_derivative(x, u, track)
    dfdx = lambda x, u: vehicle_jacobian_state(x, u, track)
    dfdu = lambda x, u: _B_CONT
    for k in range(horizon):
        for i in range(n_players):
            blk = slice(6 * i, 6 * i + 6)
            try:
                Ai, Bi = rk4_step_jacobians(
                    f, dfdx, dfdu, states[k, blk], np.asarray(inputs[i][k]), dt
                )
            except DynamicsSingularityError as err:
                raise DynamicsSingularityError(f"stage {k}: {err}", stage=k) from err
            A[k, blk, blk] = Ai
            Bs[i][k, blk, :] = Bi
    return A, Bs


# ---------------------------------------------------------------------------
# Stage-wise LQ game data produced by linearization + quadratization.
# ---------------------------------------------------------------------------


@dataclass
class LqApproximation:
    """Time-variant LQ game local to a nominal trajectory.

    A: (K, n, n); B[i]: (K, n, m_i); Q[i]: (K+1, n, n); q[i]: (K+1, n);
    R[i][j]: (K, m_j, m_j); r[i][j]: (K, m_j). Stage costs read
    0.5 dx'Q dx + q'dx + sum_j (0.5 du_j'R^{ij} du_j + r^{ij}'du_j);
    cross input terms (j != i) are carried for generality.
    """

    A: FloatArray
    B: list[FloatArray]
    Q: list[FloatArray]
    q: list[FloatArray]
    R: list[list[FloatArray]]
    r: list[list[FloatArray]]

    def __post_init__(self) -> None:
        self.A = np.asarray(self.A, dtype=float)
        horizon, n, n2 = self.A.shape
        if n != n2:
            raise ValueError("A stages must be square")
        N = len(self.B)
        for i in range(N):
            if self.B[i].shape[:2] != (horizon, n):
                raise ValueError(f"B[{i}] shape {self.B[i].shape} inconsistent with A")
            if self.Q[i].shape != (horizon + 1, n, n):
                raise ValueError(f"Q[{i}] must have shape (K+1, n, n)")
            if self.q[i].shape != (horizon + 1, n):
                raise ValueError(f"q[{i}] must have shape (K+1, n)")
            for j in range(N):
                m_j = self.B[j].shape[2]
                if self.R[i][j].shape != (horizon, m_j, m_j):
                    raise ValueError(f"R[{i}][{j}] must have shape (K, m_j, m_j)")
                if self.r[i][j].shape != (horizon, m_j):
                    raise ValueError(f"r[{i}][{j}] must have shape (K, m_j)")

    @property
    def horizon(self) -> int:
        return self.A.shape[0]

    @property
    def num_players(self) -> int:
        return len(self.B)

    @property
    def state_dim(self) -> int:
        return self.A.shape[1]

    @property
    def input_dims(self) -> list[int]:
        return [Bi.shape[2] for Bi in self.B]

    def validate(self, psd_tol: float = 1e-9) -> None:
        """Check symmetry, PSD state costs, and PD own-input costs."""
        N = self.num_players
        for i in range(N):
            for k in range(self.horizon + 1):
                Qk = self.Q[i][k]
                if not np.allclose(Qk, Qk.T, atol=1e-10):
                    raise ValueError(f"Q[{i}][{k}] not symmetric")
                if np.linalg.eigvalsh(Qk).min() < -psd_tol:
                    raise ValueError(f"Q[{i}][{k}] not positive semidefinite")
            for k in range(self.horizon):
                Rk = self.R[i][i][k]
                if not np.allclose(Rk, Rk.T, atol=1e-10):
                    raise ValueError(f"R[{i}][{i}][{k}] not symmetric")
                if np.linalg.eigvalsh(Rk).min() <= 0.0:
                    raise ValueError(f"R[{i}][{i}][{k}] not positive definite")

    @classmethod
    def zeros(cls, horizon: int, state_dim: int, input_dims: Sequence[int]) -> "LqApproximation":
        N = len(input_dims)
        return cls(
            A=np.zeros((horizon, state_dim, state_dim)),
            B=[np.zeros((horizon, state_dim, m)) for m in input_dims],
            Q=[np.zeros((horizon + 1, state_dim, state_dim)) for _ in range(N)],
            q=[np.zeros((horizon + 1, state_dim)) for _ in range(N)],
            R=[[np.zeros((horizon, input_dims[j], input_dims[j])) for j in range(N)] for _ in range(N)],
            r=[[np.zeros((horizon, input_dims[j])) for j in range(N)] for _ in range(N)],
        )
