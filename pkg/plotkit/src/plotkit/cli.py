"""plotkit command line: render verified study directories to images."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .render import FORMATS, FigureJob, RenderError, render, render_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render demon-sim study CSVs into figures.")
    parser.add_argument("--version", action="version",
                        version=f"plotkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one study directory")
    p.add_argument("--fig", required=True, help="figure id, e.g. fig3")
    p.add_argument("--in", dest="input_dir", required=True,
                   help="study directory holding manifest.json")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--format", choices=FORMATS, default="svg")

    p = sub.add_parser("render-all", help="render every manifest under a root")
    p.add_argument("--root", required=True)
    p.add_argument("--out-dir", default=None,
                   help="write images here instead of next to the inputs")
    p.add_argument("--format", choices=FORMATS, default="svg")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            path = render(FigureJob(args.fig, Path(args.input_dir),
                                    Path(args.out), args.format))
            print(f"wrote {path}")
            return 0
        summary = render_all(args.root, args.out_dir, args.format)
        for path in summary["rendered"]:
            print(f"wrote {path}")
        for skipped in summary["skipped"]:
            print(f"skipped {skipped} (no renderer)")
        for failure in summary["failures"]:
            print(f"error {failure['input']}: {failure['error']}", file=sys.stderr)
        return 0 if not summary["failures"] else 1
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
