"""Figure rendering CLI: ``figs <figure-id> --data DIR --out DIR``.

``figs all`` renders every known figure.  Exit codes: 0 success, 1 usage
error, 2 rendering failure.
"""

from __future__ import annotations

import argparse
import sys

from .dataio import RenderInputError
from .recipes import FIGURE_IDS, build_recipe
from .render import render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="figs",
                                     description="render condlin experiment figures")
    parser.add_argument("figure", choices=FIGURE_IDS + ("all",),
                        help="figure id to render")
    parser.add_argument("--data", required=True, help="directory of condlin CSV output")
    parser.add_argument("--out", required=True, help="directory for image output")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1

    ids = FIGURE_IDS if args.figure == "all" else (args.figure,)
    status = 0
    for figure_id in ids:
        try:
            path = render(build_recipe(figure_id, args.data), args.data, args.out)
            print(path)
        except RenderInputError as exc:
            print(f"figs: {figure_id}: {exc}", file=sys.stderr)
            status = 2
        except Exception as exc:
            print(f"figs: {figure_id}: unexpected failure: {exc!r}", file=sys.stderr)
            status = 2
    return status


if __name__ == "__main__":
    sys.exit(main())
