"""Command-line entry point: solve scenarios and export trajectories."""

from __future__ import annotations

import argparse
import sys
from multiprocessing import Pool
from pathlib import Path

from . import scenarios as bundled
from .scenario import ScenarioValidationError, load_scenario, run


def _resolve(spec: str) -> Path:
    """A scenario argument is a file path or the name of a bundled scenario."""
    path = Path(spec)
    if path.exists():
        return path
    name = spec.removesuffix(".json")
    bundled_path = bundled.path_for(name)
    if bundled_path is not None:
        return bundled_path
    raise FileNotFoundError(
        f"scenario {spec!r} is neither a file nor one of the bundled scenarios "
        f"{bundled.names()}"
    )


def _run_one(args_tuple) -> int:
    spec, ns = args_tuple
    try:
        path = _resolve(spec)
        scenario = load_scenario(path)
    except (FileNotFoundError, ScenarioValidationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return run(
        scenario,
        out_dir=ns.out,
        mode_override=ns.mode,
        eta_override=ns.eta,
        max_iterations_override=ns.max_iters,
        tol_override=ns.tol,
        certify=ns.certify,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ilqracing",
        description="Iterative LQ game solver for racing scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve scenarios and export CSV + metadata")
    p_run.add_argument("scenario", nargs="+", help="scenario JSON path or bundled name")
    p_run.add_argument(
        "--mode",
        choices=["feedback", "open-loop", "ilqr"],
        default=None,
        help="override the scenario's solver mode",
    )
    p_run.add_argument("--eta", type=float, default=None, help="override the step size")
    p_run.add_argument(
        "--max-iters", type=int, default=None, help="override the iteration budget"
    )
    p_run.add_argument(
        "--tol", type=float, default=None, help="override the convergence tolerance"
    )
    p_run.add_argument(
        "--certify",
        action="store_true",
        help="compute per-player best-response gaps into the metadata",
    )
    p_run.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed for randomized scenario generators (deterministic scenarios ignore it)",
    )
    p_run.add_argument("--out", default="out", help="output directory (default: ./out)")
    p_run.add_argument(
        "--sweep",
        action="store_true",
        help="run multiple scenarios in parallel worker processes",
    )

    p_ls = sub.add_parser("scenarios", help="list the bundled scenarios")

    ns = parser.parse_args(argv)

    if ns.command == "scenarios":
        for name in bundled.names():
            print(name)
        return 0

    jobs = [(spec, ns) for spec in ns.scenario]
    if ns.sweep and len(jobs) > 1:
        with Pool(processes=min(len(jobs), 8)) as pool:
            codes = pool.map(_run_one, jobs)
    else:
        codes = [_run_one(job) for job in jobs]

    if any(code == 1 for code in codes):
        return 1
    if any(code == 2 for code in codes):
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
