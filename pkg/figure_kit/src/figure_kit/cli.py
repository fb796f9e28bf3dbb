"""Command-line entry point: figkit render --recipe <path>."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, RecipeError, load_recipe, render_figure


def build_parser():
    parser = argparse.ArgumentParser(
        prog="figkit",
        description="Render figures from simulation CSV outputs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    render = sub.add_parser("render", help="render one figure from a recipe file")
    render.add_argument("--recipe", required=True, help="path to a YAML recipe")
    sub.add_parser("list-kinds", help="print the supported figure kinds")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list-kinds":
        for kind in KINDS:
            print(kind)
        return 0
    try:
        recipe = load_recipe(args.recipe)
        path = render_figure(recipe)
    except RecipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
