import numpy as np
import pytest

from ilqracing import (
    LqApproximation,
    SolverSingularityError,
    StrategySet,
    affine_lqr,
    feedback_backward,
    lq_rollout,
    lq_rollout_inputs,
    lq_total_cost,
    riccati_lqr,
    solve_feedback_lq,
    solve_openloop_lq,
)

from conftest import random_lq_game
from lq_oracles import input_space_best_response, openloop_best_response_gaps


def scalar_game(A=1.0, B=1.0, Q=1.0, R=1.0, K=1, QK=None):
    lq = LqApproximation.zeros(K, 1, [1])
    lq.A[:] = A
    lq.B[0][:] = B
    for k in range(K):
        lq.Q[0][k] = [[Q]]
        lq.R[0][0][k] = [[R]]
    lq.Q[0][K] = [[Q if QK is None else QK]]
    return lq


def test_riccati_hand_evaluated_one_step():
    strat = riccati_lqr(scalar_game())
    assert strat.gains[0][0, 0, 0] == pytest.approx(0.5)
    # Rebuild P_0 from the recursion by hand: 1 + 1 - 1*(1+1)^-1*1 = 1.5.
    _, rec = feedback_backward(scalar_game())
    assert rec.P[0][0][0, 0] == pytest.approx(1.5)


def test_riccati_zero_value_function_zero_gains():
    lq = LqApproximation.zeros(5, 3, [2])
    lq.A[:] = np.eye(3)
    lq.B[0][:] = np.ones((3, 2))
    for k in range(5):
        lq.R[0][0][k] = np.eye(2)
    strat = riccati_lqr(lq)
    assert all(np.all(strat.gains[0][k] == 0.0) for k in range(5))
    assert all(np.all(strat.feedforwards[0][k] == 0.0) for k in range(5))


def test_feedback_matches_riccati_single_player():
    rng = np.random.default_rng(101)
    for _ in range(20):
        n = rng.integers(1, 7)
        m = rng.integers(1, 4)
        K = rng.integers(1, 21)
        lq = random_lq_game(rng, 1, int(n), [int(m)], int(K))
        fb = solve_feedback_lq(lq)
        rc = riccati_lqr(lq)
        for k in range(lq.horizon):
            np.testing.assert_allclose(
                fb.gains[0][k], rc.gains[0][k], rtol=1e-10, atol=1e-12
            )
            np.testing.assert_allclose(
                fb.feedforwards[0][k], rc.feedforwards[0][k], rtol=1e-10, atol=1e-12
            )


def test_feedback_zero_input_matrices():
    rng = np.random.default_rng(5)
    lq = random_lq_game(rng, 2, 3, [2, 2], 4)
    for i in range(2):
        lq.B[i][:] = 0.0
    strat = solve_feedback_lq(lq)
    for i in range(2):
        for k in range(4):
            np.testing.assert_array_equal(strat.gains[i][k], 0.0)
            expected = np.linalg.solve(lq.R[i][i][k], lq.r[i][i][k])
            np.testing.assert_allclose(strat.feedforwards[i][k], expected, atol=1e-14)


def _stationarity_residuals(lq, strat, rec):
    """Residuals of the coupled stage optimality systems for all players/stages."""
    worst = 0.0
    N = lq.num_players
    for k in range(lq.horizon):
        A = lq.A[k]
        for i in range(N):
            B_i = lq.B[i][k]
            P_next = rec.P[i][k + 1]
            lhs_K = (lq.R[i][i][k] + B_i.T @ P_next @ B_i) @ strat.gains[i][k]
            lhs_k = (lq.R[i][i][k] + B_i.T @ P_next @ B_i) @ strat.feedforwards[i][k]
            for j in range(N):
                if j != i:
                    lhs_K = lhs_K + B_i.T @ P_next @ lq.B[j][k] @ strat.gains[j][k]
                    lhs_k = lhs_k + B_i.T @ P_next @ lq.B[j][k] @ strat.feedforwards[j][k]
            rhs_K = B_i.T @ P_next @ A
            rhs_k = B_i.T @ rec.p[i][k + 1] + lq.r[i][i][k]
            scale = 1.0 + max(
                np.abs(rhs_K).max(), np.abs(rhs_k).max(),
                np.abs(lhs_K).max(), np.abs(lhs_k).max(),
            )
            worst = max(
                worst,
                np.abs(lhs_K - rhs_K).max() / scale,
                np.abs(lhs_k - rhs_k).max() / scale,
            )
    return worst


@pytest.mark.parametrize("cross", [False, True])
def test_feedback_residuals_two_player_scalar(cross):
    rng = np.random.default_rng(103)
    for _ in range(25):
        lq = random_lq_game(rng, 2, 1, [1, 1], 2, cross_input_terms=cross)
        strat, rec = feedback_backward(lq)
        assert _stationarity_residuals(lq, strat, rec) <= 1e-12


@pytest.mark.parametrize("players,dim", [(2, 4), (3, 3)])
def test_feedback_residuals_general(players, dim):
    rng = np.random.default_rng(107 + players)
    for _ in range(10):
        lq = random_lq_game(rng, players, dim, None, 6, cross_input_terms=True)
        strat, rec = feedback_backward(lq)
        assert _stationarity_residuals(lq, strat, rec) <= 1e-10


def test_feedback_value_matrices_symmetric():
    rng = np.random.default_rng(109)
    lq = random_lq_game(rng, 3, 4, None, 8, cross_input_terms=True)
    _, rec = feedback_backward(lq)
    for i in range(3):
        for k in range(9):
            np.testing.assert_allclose(rec.P[i][k], rec.P[i][k].T, atol=1e-12)


def test_feedback_best_response_reproduces_gains():
    # Freeze opponents' affine laws, fold them into dynamics and cost, and
    # solve the resulting single-player problem exactly: at a feedback Nash
    # solution this returns the player's own law.
    rng = np.random.default_rng(113)
    for trial in range(10):
        N = 2 if trial % 2 == 0 else 3
        lq = random_lq_game(rng, N, 3, None, 6, cross_input_terms=True)
        strat, _ = feedback_backward(lq)
        K_h = lq.horizon
        for i in range(N):
            n = lq.state_dim
            A_eff = np.zeros_like(lq.A)
            c_eff = np.zeros((K_h, n))
            Q_eff = np.zeros((K_h + 1, n, n))
            q_eff = np.zeros((K_h + 1, n))
            Q_eff[K_h] = lq.Q[i][K_h]
            q_eff[K_h] = lq.q[i][K_h]
            for k in range(K_h):
                A_eff[k] = lq.A[k]
                Q_eff[k] = lq.Q[i][k]
                q_eff[k] = lq.q[i][k]
                for j in range(N):
                    if j == i:
                        continue
                    Kj, kj = strat.gains[j][k], strat.feedforwards[j][k]
                    A_eff[k] = A_eff[k] - lq.B[j][k] @ Kj
                    c_eff[k] = c_eff[k] - lq.B[j][k] @ kj
                    Q_eff[k] = Q_eff[k] + Kj.T @ lq.R[i][j][k] @ Kj
                    q_eff[k] = q_eff[k] + Kj.T @ (lq.R[i][j][k] @ kj - lq.r[i][j][k])
            br = affine_lqr(
                A_eff, lq.B[i], c_eff, Q_eff, q_eff, lq.R[i][i], lq.r[i][i]
            )
            for k in range(K_h):
                assert np.abs(br.gains[k] - strat.gains[i][k]).max() <= 1e-8 * (
                    1.0 + np.abs(strat.gains[i][k]).max()
                )
                assert np.abs(br.feedforwards[k] - strat.feedforwards[i][k]).max() <= 1e-8 * (
                    1.0 + np.abs(strat.feedforwards[i][k]).max()
                )


def test_openloop_homogeneous_game_zero_feedforward():
    rng = np.random.default_rng(127)
    lq = random_lq_game(rng, 2, 3, None, 5, linear_terms=False)
    strat = solve_openloop_lq(lq, np.zeros(3))
    for i in range(2):
        np.testing.assert_allclose(strat.feedforwards[i], 0.0, atol=1e-14)
        np.testing.assert_array_equal(strat.gains[i], 0.0)
    assert strat.mode == "open-loop"


def test_openloop_single_player_matches_feedback_rollout():
    rng = np.random.default_rng(131)
    for _ in range(15):
        lq = random_lq_game(rng, 1, 4, [2], 8, linear_terms=False)
        dx0 = rng.normal(size=4)
        ol = solve_openloop_lq(lq, dx0)
        fb = solve_feedback_lq(lq)
        dxs_ol, _ = lq_rollout(lq, dx0, ol)
        dxs_fb, _ = lq_rollout(lq, dx0, fb)
        scale = 1.0 + np.abs(dxs_fb).max()
        assert np.abs(dxs_ol - dxs_fb).max() / scale <= 1e-8


def test_openloop_single_player_with_linear_terms_matches_feedback():
    rng = np.random.default_rng(137)
    for _ in range(10):
        lq = random_lq_game(rng, 1, 3, [2], 6, linear_terms=True)
        dx0 = rng.normal(size=3)
        dxs_ol, _ = lq_rollout(lq, dx0, solve_openloop_lq(lq, dx0))
        dxs_fb, _ = lq_rollout(lq, dx0, solve_feedback_lq(lq))
        assert np.abs(dxs_ol - dxs_fb).max() / (1.0 + np.abs(dxs_fb).max()) <= 1e-8


def test_openloop_two_player_scalar_best_response():
    rng = np.random.default_rng(139)
    for _ in range(20):
        lq = random_lq_game(rng, 2, 1, [1, 1], 4)
        dx0 = rng.normal(size=1)
        strat = solve_openloop_lq(lq, dx0)
        _, dus = lq_rollout(lq, dx0, strat)
        gaps = openloop_best_response_gaps(lq, dx0, dus)
        assert max(gaps) <= 1e-9


@pytest.mark.parametrize("players,dim,horizon", [(2, 4, 10), (3, 6, 7), (2, 6, 10)])
def test_openloop_best_response_property(players, dim, horizon):
    rng = np.random.default_rng(149 + players + dim)
    for _ in range(5):
        lq = random_lq_game(rng, players, dim, None, horizon)
        dx0 = rng.normal(size=dim)
        strat = solve_openloop_lq(lq, dx0)
        _, dus = lq_rollout(lq, dx0, strat)
        gaps = openloop_best_response_gaps(lq, dx0, dus)
        assert max(gaps) <= 1e-8


def test_affine_lqr_agrees_with_input_space_qp():
    rng = np.random.default_rng(151)
    for _ in range(10):
        lq = random_lq_game(rng, 1, 3, [2], 6)
        dx0 = rng.normal(size=3)
        c = rng.normal(size=(6, 3)) * 0.2

        # Affine drift folded into a fake second player with frozen inputs.
        lq2 = random_lq_game(rng, 2, 3, [2, 3], 6)
        for arr_pair in zip(
            (lq2.A, lq2.B[0], lq2.Q[0], lq2.q[0], lq2.R[0][0], lq2.r[0][0]),
            (lq.A, lq.B[0], lq.Q[0], lq.q[0], lq.R[0][0], lq.r[0][0]),
        ):
            arr_pair[0][:] = arr_pair[1]
        lq2.B[1][:] = np.eye(3)[None, :, :]
        lq2.R[0][1][:] = 0.0
        lq2.r[0][1][:] = 0.0
        frozen = [np.zeros((6, 2)), c]

        sol = affine_lqr(lq.A, lq.B[0], c, lq.Q[0], lq.q[0], lq.R[0][0], lq.r[0][0])
        # Roll the affine-LQR policy through the offset dynamics.
        dx = dx0.copy()
        us = np.zeros((6, 2))
        for k in range(6):
            us[k] = -sol.gains[k] @ dx - sol.feedforwards[k]
            dx = lq.A[k] @ dx + lq.B[0][k] @ us[k] + c[k]
        u_qp, _ = input_space_best_response(lq2, 0, dx0, frozen)
        np.testing.assert_allclose(us, u_qp, atol=1e-8)


def test_feedback_singularity_reports_stage_and_condition():
    lq = LqApproximation.zeros(1, 2, [1, 1])
    lq.A[:] = np.eye(2)
    b = np.array([[1.0], [0.0]])
    lq.B[0][:] = b
    lq.B[1][:] = b
    for i in range(2):
        lq.Q[i][1] = np.eye(2)
        lq.R[i][i][0] = [[1e-14]]
    with pytest.raises(SolverSingularityError) as exc:
        solve_feedback_lq(lq)
    assert exc.value.stage == 0
    assert exc.value.cond > 1e12


def test_openloop_singularity_reports_stage():
    lq = LqApproximation.zeros(1, 2, [2])
    lq.A[:] = np.eye(2)
    lq.B[0][:] = np.eye(2)
    lq.R[0][0][:] = np.eye(2)
    lq.Q[0][1] = -np.eye(2)  # drives the coupling matrix to exactly zero
    with pytest.raises(SolverSingularityError) as exc:
        solve_openloop_lq(lq, np.zeros(2))
    assert exc.value.stage == 0


def test_strategy_set_invariants():
    with pytest.raises(ValueError):
        StrategySet(
            gains=[np.ones((3, 2, 4))],
            feedforwards=[np.zeros((3, 2))],
            mode="open-loop",
        )
    with pytest.raises(ValueError):
        StrategySet(gains=[np.zeros((3, 2, 4))], feedforwards=[np.zeros((3, 2))], mode="nope")


def test_lq_cost_helper_matches_manual_sum():
    rng = np.random.default_rng(157)
    lq = random_lq_game(rng, 2, 3, None, 4, cross_input_terms=True)
    dx0 = rng.normal(size=3)
    dus = [rng.normal(size=(4, 2)) for _ in range(2)]
    dxs = lq_rollout_inputs(lq, dx0, dus)
    manual = 0.0
    for k in range(4):
        manual += 0.5 * dxs[k] @ lq.Q[0][k] @ dxs[k] + lq.q[0][k] @ dxs[k]
        for j in range(2):
            manual += 0.5 * dus[j][k] @ lq.R[0][j][k] @ dus[j][k] + lq.r[0][j][k] @ dus[j][k]
    manual += 0.5 * dxs[4] @ lq.Q[0][4] @ dxs[4] + lq.q[0][4] @ dxs[4]
    assert lq_total_cost(lq, 0, dxs, dus) == pytest.approx(manual, rel=1e-12)
