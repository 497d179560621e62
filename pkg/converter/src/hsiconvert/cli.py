"""CLI: ``hsiconvert convert --cube <mat> --gt <mat> --out <dir>``."""

import argparse
import sys

from .convert import ConversionSpec, ShapeMismatch, UnreadableInput, convert


def parse_band_list(text):
    """Parse "108-112,154-167,224" into a sorted tuple of 1-based indices."""
    bands = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "-" in chunk:
            lo, hi = chunk.split("-", 1)
            bands.extend(range(int(lo), int(hi) + 1))
        else:
            bands.append(int(chunk))
    return tuple(sorted(set(bands)))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hsiconvert",
        description="Convert MAT-file hyperspectral datasets to the portable "
                    "cube directory format",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("convert", help="convert one cube + ground-truth pair")
    p.add_argument("--cube", required=True, help="MAT file with the 3-D cube")
    p.add_argument("--gt", required=True, help="MAT file with the 2-D labels")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--drop-bands", default=None,
                   help="1-based bands to discard, e.g. 108-112,154-167,224")
    p.add_argument("--class-names", default=None,
                   help="comma-separated class names (class 1 first)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = ConversionSpec(
            cube_path=args.cube,
            gt_path=args.gt,
            out_dir=args.out,
            drop_bands=parse_band_list(args.drop_bands) if args.drop_bands else None,
            class_names=(
                [c.strip() for c in args.class_names.split(",")]
                if args.class_names else None
            ),
        )
        meta = convert(spec)
    except UnreadableInput as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ShapeMismatch, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(
        f"wrote {meta['rows']}x{meta['cols']}x{meta['bands']} cube "
        f"({meta['n_classes']} classes) to {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
