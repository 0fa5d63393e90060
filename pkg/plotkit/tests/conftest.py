"""Fixtures: synthetic exports in the documented schema, acceptance summary hook."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

_ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_log():
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


def synthetic_export(
    directory: Path,
    stem: str,
    num_players: int = 2,
    horizon: int = 6,
    amplitude: float = 1.0,
    with_meta: bool = True,
) -> Path:
    """Write a small CSV (+ metadata) in the exporter's schema."""
    dt = 0.1
    header = ["t"]
    for i in range(num_players):
        header += [f"p{i + 1}_{f}" for f in ("s", "V", "n", "chi", "ax", "ay", "jx", "jy")]
    lines = [",".join(header)]
    for k in range(horizon + 1):
        row = [f"{k * dt:.17g}"]
        for i in range(num_players):
            s = 10.0 * i + 20.0 * k * dt
            n = amplitude * np.sin(0.5 * k + i)
            vals = [s, 20.0 + i, n, 0.01 * i, 0.5 * np.sin(k), 0.2 * np.cos(k)]
            row += [f"{v:.17g}" for v in vals]
            if k < horizon:
                row += [f"{0.1 * k:.17g}", f"{-0.1 * k:.17g}"]
            else:
                row += ["", ""]
        lines.append(",".join(row))
    csv_path = directory / f"{stem}.csv"
    csv_path.write_text("\n".join(lines) + "\n")

    if with_meta:
        meta = {
            "mode": "feedback",
            "eta": 0.2,
            "iterations": 4,
            "converged": True,
            "costs": [-1.0] * num_players,
            "state_change_norms": [1.0, 0.1, 0.01, 0.0001],
            "cost_history": [[-1.0] * num_players] * 5,
            "horizon": horizon,
            "dt": dt,
            "num_players": num_players,
            "track": {
                "segments": [
                    {
                        "length_m": 50.0,
                        "curvature_1pm": 0.0,
                        "width_left_m": 6.0,
                        "width_right_m": 6.0,
                    }
                ]
            },
            "gg": [
                {"a_x_max_table": [[0.0, 10.0], [25.0, 0.0]], "rho_table": [[0.0, 12.0]]}
                for _ in range(num_players)
            ],
        }
        (directory / f"{stem}_meta.json").write_text(json.dumps(meta, indent=2))
    return csv_path
