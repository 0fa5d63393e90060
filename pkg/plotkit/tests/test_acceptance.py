"""Acceptance: render the comparison figures from real solver exports.

Drives the solver package strictly through its command line and file
formats; no in-process coupling.
"""

import subprocess
import sys
from pathlib import Path

import pytest

from plotkit import PlotSpec, SchemaError, render

from conftest import synthetic_export


def run_solver(args, cwd=None):
    res = subprocess.run(
        [sys.executable, "-m", "ilqracing.cli", "run", *args],
        capture_output=True,
        text=True,
    )
    return res


@pytest.fixture(scope="module")
def exports(tmp_path_factory):
    out = tmp_path_factory.mktemp("exports")
    for mode in ("feedback", "open-loop", "ilqr"):
        res = run_solver(["fig1", "--mode", mode, "--out", str(out)])
        assert res.returncode == 0, res.stderr
    res = run_solver(["fig2_low", "fig2_mid", "fig2_high", "--out", str(out)])
    assert res.returncode == 0, res.stderr
    return out


def test_acceptance_renders_comparison_figures(exports, tmp_path, acceptance_log):
    mode_csvs = {
        "feedback": exports / "fig1_feedback.csv",
        "open-loop": exports / "fig1_open-loop.csv",
        "ilqr": exports / "fig1_ilqr-baseline.csv",
    }
    produced = []

    # One trajectory overlay per solver mode.
    for mode, csv in mode_csvs.items():
        assert csv.exists()
        out = render(
            PlotSpec("trajectory", (str(csv),), str(tmp_path / f"fig1_{mode}.png"))
        )
        produced.append(out)

    # The three-mode comparison in one frame, plus envelope usage.
    out = render(
        PlotSpec(
            "trajectory",
            tuple(str(p) for p in mode_csvs.values()),
            str(tmp_path / "fig1_modes.png"),
            labels=("feedback", "open-loop", "sequential"),
        )
    )
    produced.append(out)
    produced.append(
        render(
            PlotSpec(
                "gg-usage",
                (str(mode_csvs["feedback"]),),
                str(tmp_path / "fig1_gg.png"),
            )
        )
    )

    # One sweep overlay across the opponent-caution scenarios.
    sweep = [exports / f"fig2_{v}_feedback.csv" for v in ("low", "mid", "high")]
    for p in sweep:
        assert p.exists()
    produced.append(
        render(
            PlotSpec(
                "trajectory",
                tuple(str(p) for p in sweep),
                str(tmp_path / "fig2_sweep.png"),
                labels=("ratio 1", "ratio 2", "ratio 4"),
            )
        )
    )

    # Convergence curves straight from the metadata records.
    metas = [exports / "fig1_feedback_meta.json", exports / "fig1_open-loop_meta.json"]
    produced.append(
        render(
            PlotSpec(
                "convergence",
                tuple(str(p) for p in metas),
                str(tmp_path / "fig1_convergence.png"),
                labels=("feedback", "open-loop"),
            )
        )
    )

    ok = all(p.exists() and p.stat().st_size > 1000 for p in produced)
    acceptance_log(
        "8 figure rendering from exports",
        ok,
        f"{len(produced)} figures rendered from {len(mode_csvs) + len(sweep)} exports",
    )
    assert ok


def test_acceptance_schema_mismatch_fails_with_named_column(tmp_path, acceptance_log):
    bad = synthetic_export(tmp_path, "bad", with_meta=False)
    bad.write_text(bad.read_text().replace("p1_chi", "p1_heading"))
    named = False
    try:
        render(PlotSpec("trajectory", (str(bad),), str(tmp_path / "x.png")))
    except SchemaError as err:
        named = "p1_heading" in str(err)
    acceptance_log(
        "8 schema mismatch reporting", named, "offending column named in the error"
    )
    assert named
