"""Command-line entry point. Every subcommand prints JSON to stdout."""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .errors import BsbError
from .evaluate import ablate_k, eval_success_rate
from .matcher import ClickContext, DEFAULT_K, bsb_match, bsb_match_reverse
from .mesh import load_mesh, normalize_mesh
from .rasterizer import (
    Camera,
    DEFAULT_FOV,
    DEFAULT_RADIUS,
    DEFAULT_SIZE,
    render,
    sample_views,
    view_grid,
    write_ppm_gray,
    write_ppm_ids,
)
from .segmenters import parse_seg2d_spec, parse_seg3d_spec
from .tensor_io import (
    FeatureImage,
    Mask2D,
    Mask3D,
    VertexFeatureField,
    load_manifest,
    read_tensor,
    write_tensor,
)

logger = logging.getLogger("bsb")


def _emit(payload) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fail(message: str, code: int = 1) -> int:
    sys.stderr.write(json.dumps({"error": message}) + "\n")
    return code


def _parse_click(text: str):
    try:
        x, y = text.split(",")
        return int(x), int(y)
    except ValueError:
        raise BsbError(f"--click must be X,Y integers, got {text!r}")


def _parse_size(text: str):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise BsbError(f"--size must be WxH, got {text!r}")


def _cameras_from_flags(args, width: int, height: int) -> List[Camera]:
    if getattr(args, "grid", False) and args.random is not None:
        raise BsbError("--grid and --random are mutually exclusive")
    common = dict(radius=args.radius, fov=args.fov, width=width, height=height)
    if args.random is not None:
        if args.seed is None:
            raise BsbError("--random sampling requires --seed")
        return sample_views(args.random, args.seed, **common)
    return view_grid(**common)


def _candidates_json(result):
    out = []
    for c in result.candidates:
        entry = {
            "vertex": getattr(c, "vertex", None),
            "similarity": float(c.similarity),
            "pixel": None if c.pixel is None else list(c.pixel),
            "iou": None if c.iou is None else float(c.iou),
            "note": c.note,
        }
        if hasattr(c, "in_part"):
            entry["in_part"] = c.in_part
        else:
            entry["in_mask"] = c.in_mask
        out.append(entry)
    return out


def _cmd_inspect(args) -> int:
    t = read_tensor(args.file)
    _emit(
        {
            "file": str(args.file),
            "dtype": t.dtype_name,
            "dims": list(t.dims),
            "elements": int(np.prod(t.dims, dtype=np.int64)),
            "payload_bytes": t.nbytes,
        }
    )
    return 0


def _cmd_match(args) -> int:
    feat = FeatureImage.from_container(read_tensor(args.image_features))
    vfield = VertexFeatureField.from_container(read_tensor(args.vertex_features))
    if args.reverse:
        if args.vertex is None or args.mask3d is None or args.seg3d is None:
            raise BsbError("--reverse needs --vertex, --mask3d and --seg3d")
        mask3d = Mask3D.from_container(read_tensor(args.mask3d))
        mesh = load_mesh(args.mesh) if args.mesh else None
        seg3d = parse_seg3d_spec(args.seg3d, mesh=mesh, field=vfield)
        result = bsb_match_reverse(feat, vfield, args.vertex, mask3d, seg3d, args.k)
        _emit(
            {
                "pixel": None if result.pixel is None else list(result.pixel),
                "vertex": result.vertex,
                "iou3d": None if result.iou is None else float(result.iou),
                "candidates": _candidates_json(result),
            }
        )
        return 0
    if not (args.part_mask and args.object_mask and args.click and args.seg2d):
        raise BsbError("forward match needs --part-mask, --object-mask, --click, --seg2d")
    part = Mask2D.from_container(read_tensor(args.part_mask))
    obj = Mask2D.from_container(read_tensor(args.object_mask))
    seg2d = parse_seg2d_spec(args.seg2d)
    ctx = ClickContext(feat, _parse_click(args.click), part, obj, vfield, args.k)
    result = bsb_match(ctx, seg2d)
    _emit(
        {
            "vertex": result.vertex,
            "pixel": None if result.pixel is None else list(result.pixel),
            "iou": None if result.iou is None else float(result.iou),
            "candidates": _candidates_json(result),
        }
    )
    return 0


def _cmd_distill(args) -> int:
    from .distill import ViewFeatureSet, distill_features

    mesh = normalize_mesh(load_mesh(args.mesh))
    views_doc = json.loads(Path(args.views).read_text())
    entries = views_doc.get("views")
    if not isinstance(entries, list) or not entries:
        raise BsbError('views manifest must carry a non-empty "views" list')
    base = Path(args.views).parent
    feats = []
    for e in entries:
        p = Path(e["features"])
        feats.append(FeatureImage.from_container(read_tensor(p if p.is_absolute() else base / p)))
    cams: List[Optional[Camera]] = []
    for e in entries:
        c = e.get("camera")
        cams.append(
            None
            if c is None
            else Camera(
                float(c["elevation"]),
                float(c["azimuth"]),
                float(c.get("radius", args.radius)),
                float(c.get("fov", args.fov)),
                int(c.get("width", feats[len(cams)].width)),
                int(c.get("height", feats[len(cams)].height)),
            )
        )
    if any(c is None for c in cams):
        generated = _cameras_from_flags(args, feats[0].width, feats[0].height)
        if len(generated) != len(entries):
            raise BsbError(
                f"camera source yields {len(generated)} views, manifest has {len(entries)}"
            )
        cams = [c if c is not None else generated[i] for i, c in enumerate(cams)]
    views = ViewFeatureSet(tuple(zip(cams, feats)))
    field = distill_features(mesh, views)
    write_tensor(field.to_container(), args.out)
    _emit(
        {
            "out": str(args.out),
            "vertices": field.count,
            "dim": field.dim,
            "valid": int(field.valid.sum()),
            "views": len(views),
        }
    )
    return 0


def _cmd_render(args) -> int:
    mesh = normalize_mesh(load_mesh(args.mesh))
    width, height = _parse_size(args.size)
    args_ns = argparse.Namespace(
        random=args.random, seed=args.seed, radius=args.radius, fov=args.fov
    )
    cameras = _cameras_from_flags(args_ns, width, height)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, cam in enumerate(cameras):
        rmap = render(mesh, cam)
        depth_name = f"depth_{i:03d}.ppm"
        ids_name = f"vid_{i:03d}.ppm"
        write_ppm_gray(out_dir / depth_name, rmap.depth)
        write_ppm_ids(out_dir / ids_name, rmap.vertex_of_pixel)
        records.append(
            {
                "elevation": cam.elevation,
                "azimuth": cam.azimuth,
                "radius": cam.radius,
                "fov": cam.fov,
                "width": cam.width,
                "height": cam.height,
                "depth": depth_name,
                "vertex_id": ids_name,
                "visible_vertices": int(rmap.visible.sum()),
            }
        )
    (out_dir / "cameras.json").write_text(
        json.dumps({"cameras": records}, indent=2, sort_keys=True) + "\n"
    )
    _emit({"out_dir": str(out_dir), "views": len(records)})
    return 0


def _cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.method == "random" and args.seed is None:
        raise BsbError("--method random requires --seed")
    report = eval_success_rate(manifest, args.method, args.k, args.seed, args.threads)
    payload = report.to_dict()
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _emit(payload)
    return 0


def _cmd_ablate(args) -> int:
    manifest = load_manifest(args.manifest)
    try:
        ks = sorted(int(k) for k in args.ks.split(","))
    except ValueError:
        raise BsbError(f"--ks must be comma-separated integers, got {args.ks!r}")
    table = ablate_k(manifest, ks, args.seed, args.threads)
    payload = {"ablation": table}
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _emit(payload)
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    port = int(os.environ.get("BSB_PORT", args.port))
    cap = int(os.environ.get("BSB_SESSION_CAP", args.session_cap))
    serve(host=args.host, port=port, session_cap=cap)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsb", description="image-to-shape segment correspondence toolkit"
    )
    parser.add_argument("--version", action="version", version=f"bsb {__version__}")
    parser.add_argument("--log-level", default="warning", help="logging level")
    parser.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="internal parallelism budget",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="summarize a tensor container")
    p.add_argument("file")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("match", help="match a pixel click to a vertex (or reverse)")
    p.add_argument("--image-features", required=True)
    p.add_argument("--vertex-features", required=True)
    p.add_argument("--part-mask")
    p.add_argument("--object-mask")
    p.add_argument("--click", help="X,Y pixel coordinates")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--seg2d", help="2D provider spec (synthetic:|files:|static:)")
    p.add_argument("--reverse", action="store_true")
    p.add_argument("--vertex", type=int)
    p.add_argument("--mask3d")
    p.add_argument("--seg3d", help="3D provider spec (floodfill:|files:)")
    p.add_argument("--mesh")
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("distill", help="lift per-view features onto mesh vertices")
    p.add_argument("--mesh", required=True)
    p.add_argument("--views", required=True, help="views manifest JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--grid", action="store_true", help="use the standard view grid")
    p.add_argument("--random", type=int, help="sample N random views")
    p.add_argument("--seed", type=int)
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    p.add_argument("--fov", type=float, default=DEFAULT_FOV)
    p.set_defaults(func=_cmd_distill)

    p = sub.add_parser("render", help="dump depth and vertex-id maps per view")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid", action="store_true")
    p.add_argument("--random", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--size", default=f"{DEFAULT_SIZE}x{DEFAULT_SIZE}")
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    p.add_argument("--fov", type=float, default=DEFAULT_FOV)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("eval", help="success rate over a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", choices=("bsb", "nn", "random"), default="bsb")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--seed", type=int)
    p.add_argument("--report", help="also write the report JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="success rate across candidate budgets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ks", required=True, help="comma-separated budgets")
    p.add_argument("--seed", type=int)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--session-cap", type=int, default=16)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING))
    try:
        return args.func(args)
    except BsbError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(f"i/o failure: {exc}")


if __name__ == "__main__":
    sys.exit(main())
