"""Command line: plotkit <kind> --in a.csv [b.csv ...] --labels ... --out fig.png"""

from __future__ import annotations

import argparse
import sys

from .readers import SchemaError
from .render import KINDS, PlotSpec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render figures from exported trajectory CSVs and metadata JSONs.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument(
        "--in",
        dest="inputs",
        nargs="+",
        required=True,
        metavar="FILE",
        help="input CSVs (trajectory, gg-usage) or metadata JSONs (convergence)",
    )
    parser.add_argument("--labels", nargs="+", default=None, help="one label per input")
    parser.add_argument("--out", required=True, help="output image path")
    ns = parser.parse_args(argv)

    try:
        spec = PlotSpec(
            kind=ns.kind,
            inputs=tuple(ns.inputs),
            labels=None if ns.labels is None else tuple(ns.labels),
            out=ns.out,
        )
        path = render(spec)
    except (SchemaError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
