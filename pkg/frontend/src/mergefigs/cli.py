"""Render every figure family from a bundle directory.

    mergelab-render <bundle-dir> <out-dir> [--family NAME]
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .contracts import ContractError
from .render import _FAMILIES, FigureBundle, render, render_all


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = argparse.ArgumentParser(prog="mergelab-render",
                                     description=__doc__)
    parser.add_argument("bundle_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--family", default=None,
                        choices=[name for name, _ in _FAMILIES],
                        help="render a single family instead of all")
    args = parser.parse_args(argv)

    try:
        if args.family is None:
            written = render_all(args.bundle_dir, args.out_dir)
        else:
            filenames = dict(_FAMILIES)[args.family]
            bundle = FigureBundle(
                family=args.family,
                csv_paths=tuple(args.bundle_dir / n for n in filenames),
                out_dir=args.out_dir)
            written = render(bundle)
    except ContractError as exc:
        print(f"bundle contract error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing bundle file: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(written)} image files to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
