"""Analytic solvers for stage-wise linear-quadratic games.

Strategies are affine laws u_k^i = -K_k^i dx_k - k_k^i in deviations from
the nominal trajectory. The feedback solver couples all players' gains
through one stacked linear system per stage and runs a coupled value
recursion backward; the open-loop solver runs a costate recursion backward
and recovers the feedforwards in a forward sweep. A plain single-player
difference Riccati recursion and an affine-offset LQR serve as independent
oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import LqApproximation

FloatArray = np.ndarray

# Above this condition estimate a stage system is reported singular
# instead of silently returning garbage.
CONDITION_LIMIT = 1e12

FEEDBACK = "feedback"
OPEN_LOOP = "open-loop"


class SolverSingularityError(RuntimeError):
    """A stage-wise linear system was too ill-conditioned to solve."""

    def __init__(self, message: str, stage: int, cond: float):
        super().__init__(f"stage {stage}: {message} (condition estimate {cond:.3e})")
        self.stage = stage
        self.cond = cond


@dataclass
class StrategySet:
    """Per-stage, per-player affine strategies.

    gains[i] has shape (K, m_i, n) and feedforwards[i] shape (K, m_i);
    open-loop mode carries exactly-zero gains.
    """

    gains: list[FloatArray]
    feedforwards: list[FloatArray]
    mode: str

    def __post_init__(self) -> None:
        if self.mode not in (FEEDBACK, OPEN_LOOP):
            raise ValueError(f"unknown strategy mode {self.mode!r}")
        if len(self.gains) != len(self.feedforwards):
            raise ValueError("gains and feedforwards must cover the same players")
        for i, (Ki, ki) in enumerate(zip(self.gains, self.feedforwards)):
            if Ki.shape[0] != ki.shape[0] or Ki.shape[1] != ki.shape[1]:
                raise ValueError(f"player {i}: gain/feedforward shapes disagree")
        if self.mode == OPEN_LOOP and any(np.any(Ki != 0.0) for Ki in self.gains):
            raise ValueError("open-loop strategies must have zero gains")

    @property
    def horizon(self) -> int:
        return self.gains[0].shape[0]

    @property
    def num_players(self) -> int:
        return len(self.gains)


@dataclass
class ValueRecursion:
    """Backward-pass intermediates, kept for verification.

    Feedback mode fills P (quadratic value) and p (linear value); open-loop
    mode fills the costate coefficients M, m and the stage coupling
    matrices lam.
    """

    mode: str
    P: list[FloatArray] | None = None
    p: list[FloatArray] | None = None
    M: list[FloatArray] | None = None
    m: list[FloatArray] | None = None
    lam: FloatArray | None = None


def _solve_checked(mat: FloatArray, rhs: FloatArray, stage: int, label: str) -> FloatArray:
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SolverSingularityError(f"{label} is singular", stage, float(cond))
    return np.linalg.solve(mat, rhs)


def feedback_backward(lq: LqApproximation) -> tuple[StrategySet, ValueRecursion]:
    """Coupled backward recursion for the feedback solution, with values."""
    N, n, K = lq.num_players, lq.state_dim, lq.horizon
    ms = lq.input_dims
    offsets = np.concatenate([[0], np.cumsum(ms)]).astype(int)
    m_tot = int(offsets[-1])

    P = [np.zeros((K + 1, n, n)) for _ in range(N)]
    p = [np.zeros((K + 1, n)) for _ in range(N)]
    gains = [np.zeros((K, ms[i], n)) for i in range(N)]
    ffs = [np.zeros((K, ms[i])) for i in range(N)]
    for i in range(N):
        P[i][K] = 0.5 * (lq.Q[i][K] + lq.Q[i][K].T)
        p[i][K] = lq.q[i][K]

    for k in range(K - 1, -1, -1):
        A = lq.A[k]
        B = [lq.B[i][k] for i in range(N)]
        S = np.zeros((m_tot, m_tot))
        Y_gain = np.zeros((m_tot, n))
        Y_ff = np.zeros(m_tot)
        for i in range(N):
            rows = slice(offsets[i], offsets[i + 1])
            BtP = B[i].T @ P[i][k + 1]
            for j in range(N):
                cols = slice(offsets[j], offsets[j + 1])
                block = BtP @ B[j]
                if i == j:
                    block = block + lq.R[i][i][k]
                S[rows, cols] = block
            Y_gain[rows] = BtP @ A
            Y_ff[rows] = B[i].T @ p[i][k + 1] + lq.r[i][i][k]

        sol_gain = _solve_checked(S, Y_gain, k, "coupled gain system")
        sol_ff = np.linalg.solve(S, Y_ff)
        Ks = [sol_gain[offsets[i] : offsets[i + 1]] for i in range(N)]
        ks = [sol_ff[offsets[i] : offsets[i + 1]] for i in range(N)]
        for i in range(N):
            gains[i][k] = Ks[i]
            ffs[i][k] = ks[i]

        F = A - sum(B[j] @ Ks[j] for j in range(N))
        beta = -sum(B[j] @ ks[j] for j in range(N))
        for i in range(N):
            P_next = P[i][k + 1]
            P_new = lq.Q[i][k] + F.T @ P_next @ F
            p_new = lq.q[i][k] + F.T @ (p[i][k + 1] + P_next @ beta)
            for j in range(N):
                P_new = P_new + Ks[j].T @ lq.R[i][j][k] @ Ks[j]
                p_new = p_new + Ks[j].T @ (lq.R[i][j][k] @ ks[j] - lq.r[i][j][k])
            P[i][k] = 0.5 * (P_new + P_new.T)
            p[i][k] = p_new

    strategies = StrategySet(gains=gains, feedforwards=ffs, mode=FEEDBACK)
    return strategies, ValueRecursion(mode=FEEDBACK, P=P, p=p)


def solve_feedback_lq(lq: LqApproximation) -> StrategySet:
    """Feedback Nash strategies of the LQ game."""
    strategies, _ = feedback_backward(lq)
    return strategies


def openloop_backward(lq: LqApproximation) -> ValueRecursion:
    """Costate recursion for the open-loop solution."""
    N, n, K = lq.num_players, lq.state_dim, lq.horizon
    M = [np.zeros((K + 1, n, n)) for _ in range(N)]
    m = [np.zeros((K + 1, n)) for _ in range(N)]
    lam = np.zeros((K, n, n))
    for i in range(N):
        M[i][K] = lq.Q[i][K]
        m[i][K] = lq.q[i][K]

    eye = np.eye(n)
    for k in range(K - 1, -1, -1):
        A = lq.A[k]
        lam_k = eye.copy()
        drift = np.zeros(n)
        for j in range(N):
            Bj = lq.B[j][k]
            Rjj = lq.R[j][j][k]
            lam_k = lam_k + Bj @ np.linalg.solve(Rjj, Bj.T @ M[j][k + 1])
            drift = drift + Bj @ np.linalg.solve(
                Rjj, Bj.T @ m[j][k + 1] + lq.r[j][j][k]
            )
        lam[k] = lam_k
        lam_inv_A = _solve_checked(lam_k, A, k, "open-loop coupling matrix")
        lam_inv_drift = np.linalg.solve(lam_k, drift)
        for i in range(N):
            m[i][k] = A.T @ (m[i][k + 1] - M[i][k + 1] @ lam_inv_drift) + lq.q[i][k]
            M[i][k] = lq.Q[i][k] + A.T @ M[i][k + 1] @ lam_inv_A
    return ValueRecursion(mode=OPEN_LOOP, M=M, m=m, lam=lam)


def solve_openloop_lq(lq: LqApproximation, dx0: FloatArray) -> StrategySet:
    """Open-loop Nash strategies: state-independent feedforwards, zero gains.

    The backward costate recursion is followed by a forward sweep that
    propagates the equilibrium state deviation and reads off each player's
    input; the affine convention u^i = -k^i fixes the feedforward sign.
    """
    N, n, K = lq.num_players, lq.state_dim, lq.horizon
    dx0 = np.asarray(dx0, dtype=float)
    if dx0.shape != (n,):
        raise ValueError(f"dx0 must have shape ({n},), got {dx0.shape}")
    rec = openloop_backward(lq)
    assert rec.M is not None and rec.m is not None and rec.lam is not None

    gains = [np.zeros((K, m_i, n)) for m_i in lq.input_dims]
    ffs = [np.zeros((K, m_i)) for m_i in lq.input_dims]
    dx = dx0
    for k in range(K):
        A = lq.A[k]
        drift = np.zeros(n)
        for j in range(N):
            Bj = lq.B[j][k]
            drift = drift + Bj @ np.linalg.solve(
                lq.R[j][j][k], Bj.T @ rec.m[j][k + 1] + lq.r[j][j][k]
            )
        dx_next = _solve_checked(rec.lam[k], A @ dx - drift, k, "open-loop coupling matrix")
        for i in range(N):
            Bi = lq.B[i][k]
            ffs[i][k] = np.linalg.solve(
                lq.R[i][i][k],
                Bi.T @ (rec.M[i][k + 1] @ dx_next + rec.m[i][k + 1]) + lq.r[i][i][k],
            )
        dx = dx_next
    return StrategySet(gains=gains, feedforwards=ffs, mode=OPEN_LOOP)


def riccati_lqr(lq: LqApproximation) -> StrategySet:
    """Single-player difference Riccati recursion, used as a test oracle.

    Implements the textbook form P_k = Q_k + A'PA - (A'PB)(R + B'PB)^{-1}(B'PA)
    with the linear-term recursion alongside; requires N == 1.
    """
    if lq.num_players != 1:
        raise ValueError("riccati_lqr applies to single-player problems only")
    n, K = lq.state_dim, lq.horizon
    m = lq.input_dims[0]
    P = lq.Q[0][K].copy()
    p = lq.q[0][K].copy()
    gains = np.zeros((K, m, n))
    ffs = np.zeros((K, m))
    for k in range(K - 1, -1, -1):
        A, B = lq.A[k], lq.B[0][k]
        H = lq.R[0][0][k] + B.T @ P @ B
        BtPA = B.T @ P @ A
        gains[k] = _solve_checked(H, BtPA, k, "input Hessian")
        ffs[k] = np.linalg.solve(H, B.T @ p + lq.r[0][0][k])
        P_new = lq.Q[0][k] + A.T @ P @ A - (A.T @ P @ B) @ np.linalg.solve(H, BtPA)
        F = A - B @ gains[k]
        beta = -B @ ffs[k]
        p = (
            lq.q[0][k]
            + F.T @ (p + P @ beta)
            + gains[k].T @ (lq.R[0][0][k] @ ffs[k] - lq.r[0][0][k])
        )
        P = 0.5 * (P_new + P_new.T)
    return StrategySet(gains=[gains], feedforwards=[ffs], mode=FEEDBACK)


@dataclass
class AffineLqrSolution:
    """Policy and value of a single-player LQR with affine dynamics offsets."""

    gains: FloatArray  # (K, m, n)
    feedforwards: FloatArray  # (K, m)
    P: FloatArray  # (K+1, n, n)
    p: FloatArray  # (K+1, n)


def affine_lqr(
    A: FloatArray,
    B: FloatArray,
    c: FloatArray,
    Q: FloatArray,
    q: FloatArray,
    R: FloatArray,
    r: FloatArray,
) -> AffineLqrSolution:
    """Exact best-response solver: x' = A x + B u + c with linear cost terms.

    Stage cost 0.5 x'Qx + q'x + 0.5 u'Ru + r'u; returns the optimal affine
    policy u = -K x - k and the value coefficients. This is the oracle used
    to verify Nash conditions of the game solvers.
    """
    K_stages, n, m = B.shape[0], A.shape[1], B.shape[2]
    P = np.zeros((K_stages + 1, n, n))
    p = np.zeros((K_stages + 1, n))
    P[K_stages] = 0.5 * (Q[K_stages] + Q[K_stages].T)
    p[K_stages] = q[K_stages]
    gains = np.zeros((K_stages, m, n))
    ffs = np.zeros((K_stages, m))
    for k in range(K_stages - 1, -1, -1):
        H = R[k] + B[k].T @ P[k + 1] @ B[k]
        gains[k] = _solve_checked(H, B[k].T @ P[k + 1] @ A[k], k, "input Hessian")
        ffs[k] = np.linalg.solve(H, B[k].T @ (P[k + 1] @ c[k] + p[k + 1]) + r[k])
        F = A[k] - B[k] @ gains[k]
        d = c[k] - B[k] @ ffs[k]
        P_new = Q[k] + gains[k].T @ R[k] @ gains[k] + F.T @ P[k + 1] @ F
        P[k] = 0.5 * (P_new + P_new.T)
        p[k] = (
            q[k]
            + gains[k].T @ (R[k] @ ffs[k] - r[k])
            + F.T @ (P[k + 1] @ d + p[k + 1])
        )
    return AffineLqrSolution(gains=gains, feedforwards=ffs, P=P, p=p)


def lq_rollout(
    lq: LqApproximation, dx0: FloatArray, strategies: StrategySet
) -> tuple[FloatArray, list[FloatArray]]:
    """Roll the linear dynamics under affine strategies; returns (dxs, dus)."""
    N, n, K = lq.num_players, lq.state_dim, lq.horizon
    dxs = np.zeros((K + 1, n))
    dxs[0] = np.asarray(dx0, dtype=float)
    dus = [np.zeros((K, m_i)) for m_i in lq.input_dims]
    for k in range(K):
        dx = dxs[k]
        step = lq.A[k] @ dx
        for i in range(N):
            u = -strategies.gains[i][k] @ dx - strategies.feedforwards[i][k]
            dus[i][k] = u
            step = step + lq.B[i][k] @ u
        dxs[k + 1] = step
    return dxs, dus


def lq_rollout_inputs(
    lq: LqApproximation, dx0: FloatArray, dus: Sequence[FloatArray]
) -> FloatArray:
    """Roll the linear dynamics under fixed input deviation sequences."""
    n, K = lq.state_dim, lq.horizon
    dxs = np.zeros((K + 1, n))
    dxs[0] = np.asarray(dx0, dtype=float)
    for k in range(K):
        step = lq.A[k] @ dxs[k]
        for i in range(lq.num_players):
            step = step + lq.B[i][k] @ dus[i][k]
        dxs[k + 1] = step
    return dxs


def lq_total_cost(
    lq: LqApproximation, i: int, dxs: FloatArray, dus: Sequence[FloatArray]
) -> float:
    """Player i's quadratic cost along a deviation trajectory."""
    K = lq.horizon
    total = 0.0
    for k in range(K):
        dx = dxs[k]
        total += 0.5 * dx @ lq.Q[i][k] @ dx + lq.q[i][k] @ dx
        for j in range(lq.num_players):
            du = dus[j][k]
            total += 0.5 * du @ lq.R[i][j][k] @ du + lq.r[i][j][k] @ du
    dx = dxs[K]
    total += 0.5 * dx @ lq.Q[i][K] @ dx + lq.q[i][K] @ dx
    return float(total)
