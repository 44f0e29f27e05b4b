"""Batch figure rendering: marketplots --input CSV --kind KIND --out IMAGE."""

from __future__ import annotations

import argparse
import sys

from .figures import POLICY_LABELS, FigureInputError, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marketplots", description=__doc__)
    parser.add_argument("--input", required=True, help="efficiency or profile CSV")
    parser.add_argument("--kind", required=True, choices=("efficiency", "profile"))
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument(
        "--policies",
        default=",".join(POLICY_LABELS),
        help="comma-separated policy filter (default: all four)",
    )
    parser.add_argument("--format", choices=("svg", "png"), default="svg")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            input_csv=args.input,
            kind=args.kind,
            output_path=args.out,
            policies=tuple(p.strip() for p in args.policies.split(",") if p.strip()),
            image_format=args.format,
        )
        out = render(spec)
    except FigureInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
