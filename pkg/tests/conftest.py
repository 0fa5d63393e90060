"""Shared fixtures: random LQ game generators and the acceptance summary hook."""

from __future__ import annotations

import numpy as np
import pytest

from ilqracing import LqApproximation

_ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_log():
    """Record one pass/fail line per acceptance criterion for the summary."""

    def _log(criterion: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE_RESULTS.append((criterion, passed, detail))

    return _log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"[{status}] {criterion}{suffix}")


def random_psd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    L = rng.normal(size=(n, n))
    return scale * (L @ L.T) / n


def random_pd(rng: np.random.Generator, n: int, floor: float = 0.5) -> np.ndarray:
    return random_psd(rng, n) + floor * np.eye(n)


def random_lq_game(
    rng: np.random.Generator,
    num_players: int,
    state_dim: int,
    input_dims: list[int] | None = None,
    horizon: int = 8,
    linear_terms: bool = True,
    cross_input_terms: bool = False,
    spectral_radius: float = 1.0,
) -> LqApproximation:
    """A well-conditioned random time-varying LQ game."""
    if input_dims is None:
        input_dims = [2] * num_players
    N, n, K = num_players, state_dim, horizon
    A = np.zeros((K, n, n))
    for k in range(K):
        M = rng.normal(size=(n, n))
        radius = max(abs(np.linalg.eigvals(M)))
        A[k] = M * (spectral_radius / max(radius, 1e-6))
    B = [rng.normal(size=(K, n, m)) for m in input_dims]
    Q = [np.zeros((K + 1, n, n)) for _ in range(N)]
    q = [np.zeros((K + 1, n)) for _ in range(N)]
    R = [[np.zeros((K, input_dims[j], input_dims[j])) for j in range(N)] for _ in range(N)]
    r = [[np.zeros((K, input_dims[j])) for j in range(N)] for _ in range(N)]
    for i in range(N):
        for k in range(K + 1):
            Q[i][k] = random_psd(rng, n)
            if linear_terms:
                q[i][k] = rng.normal(size=n)
        for k in range(K):
            R[i][i][k] = random_pd(rng, input_dims[i])
            if linear_terms:
                r[i][i][k] = rng.normal(size=input_dims[i])
            if cross_input_terms:
                for j in range(N):
                    if j != i:
                        R[i][j][k] = random_psd(rng, input_dims[j], scale=0.3)
                        if linear_terms:
                            r[i][j][k] = 0.3 * rng.normal(size=input_dims[j])
    return LqApproximation(A=A, B=B, Q=Q, q=q, R=R, r=r)
