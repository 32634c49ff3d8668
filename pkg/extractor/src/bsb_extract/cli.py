"""bsb-extract: encode images, render views, and segmentation masks to BSBT."""

import argparse
import json
import sys
from typing import List, Optional

from .extract import (
    DEFAULT_OBJECT_TAU,
    DEFAULT_PART_TAU,
    extract_image_features,
    extract_masks,
    extract_view_features,
    grid_clicks,
    load_image,
)


def _parse_clicks(args) -> list:
    clicks = []
    for token in args.clicks or []:
        x, y = token.split(",")
        clicks.append((int(x), int(y)))
    return clicks


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="bsb-extract")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="per-pixel features for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--backbone", default="hashpatch", choices=("hashpatch", "dinov2"))
    p.add_argument("--dim", type=int, default=64, help="channels (hashpatch only)")

    p = sub.add_parser("masks", help="two-granularity masks per click")
    p.add_argument("--image", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--clicks", nargs="*", help="X,Y pairs")
    p.add_argument("--grid", type=int, help="use an NxN click grid instead")
    p.add_argument("--object-tau", type=float, default=DEFAULT_OBJECT_TAU)
    p.add_argument("--part-tau", type=float, default=DEFAULT_PART_TAU)

    p = sub.add_parser("views", help="encode a rendered-view directory")
    p.add_argument("--render-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--backbone", default="hashpatch", choices=("hashpatch", "dinov2"))
    p.add_argument("--dim", type=int, default=64)

    args = parser.parse_args(argv)
    try:
        if args.command == "features":
            tensor, meta = extract_image_features(
                args.image, args.out_dir, args.backbone, args.dim
            )
            print(json.dumps({"features": str(tensor), "meta": str(meta)}, sort_keys=True))
        elif args.command == "masks":
            clicks = _parse_clicks(args)
            if args.grid:
                h, w, _ = load_image(args.image).shape
                clicks = grid_clicks(w, h, args.grid)
            if not clicks:
                print(json.dumps({"error": "no clicks given"}), file=sys.stderr)
                return 1
            manifest = extract_masks(
                args.image, clicks, args.out_dir, args.object_tau, args.part_tau
            )
            print(json.dumps({"manifest": str(manifest)}, sort_keys=True))
        elif args.command == "views":
            manifest = extract_view_features(
                args.render_dir, args.out_dir, args.backbone, args.dim
            )
            print(json.dumps({"views": str(manifest)}, sort_keys=True))
    except (OSError, ValueError, RuntimeError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
