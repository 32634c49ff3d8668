"""Feature and mask extraction jobs writing BSBT containers plus manifests."""

import json
from collections import deque
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from .backbones import bilinear_upsample, make_backbone
from .bsbt import write_array

DEFAULT_OBJECT_TAU = 0.35
DEFAULT_PART_TAU = 0.15


def load_image(path) -> np.ndarray:
    """Image file -> RGB float array (h, w, 3) in [0, 1]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=np.float64) / 255.0


def extract_image_features(
    image_path,
    out_dir,
    backbone_name: str = "hashpatch",
    channels: int = 64,
    stem: Optional[str] = None,
) -> Tuple[Path, Path]:
    """Encode one image to per-pixel features at full resolution.

    Writes ``<stem>.bsbt`` (f32 [h, w, d]) and a ``<stem>.json`` sidecar
    recording the raw backbone grid size and the pinned backbone name.
    """
    image = load_image(image_path)
    h, w, _ = image.shape
    backbone = make_backbone(backbone_name, channels)
    grid = backbone.grid_features(image)
    gh, gw, d = grid.shape
    if d != backbone.channels:
        raise RuntimeError(f"backbone emitted {d} channels, declared {backbone.channels}")
    full = bilinear_upsample(grid, h, w)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or Path(image_path).stem
    tensor_path = out_dir / f"{stem}.bsbt"
    write_array(full, tensor_path)
    meta_path = out_dir / f"{stem}.json"
    meta_path.write_text(
        json.dumps(
            {
                "image": str(image_path),
                "backbone": backbone.name,
                "channels": d,
                "source_res": [gw, gh],
                "size": [w, h],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return tensor_path, meta_path


def _flood_mask(image: np.ndarray, x: int, y: int, tau: float) -> np.ndarray:
    """4-connected region of pixels whose color stays near the seed color."""
    h, w, _ = image.shape
    seed_color = image[y, x]
    within = np.linalg.norm(image - seed_color, axis=2) <= tau
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[y, x] = 1
    queue = deque([(x, y)])
    while queue:
        cx, cy = queue.popleft()
        for nx, ny in ((cx - 1, cy), (cx + 1, cy), (cx, cy - 1), (cx, cy + 1)):
            if 0 <= nx < w and 0 <= ny < h and not mask[ny, nx] and within[ny, nx]:
                mask[ny, nx] = 1
                queue.append((nx, ny))
    return mask


def extract_masks(
    image_path,
    clicks: Sequence[Tuple[int, int]],
    out_dir,
    object_tau: float = DEFAULT_OBJECT_TAU,
    part_tau: float = DEFAULT_PART_TAU,
) -> Path:
    """Two-granularity masks per click via color flood fill.

    The part threshold is tighter than the object threshold, so the part
    region is a subset by construction; both are still checked before write.
    Per-click failures are logged into the manifest's "skipped" list and the
    job continues. Returns the provider manifest path (file-backed schema).
    """
    if part_tau > object_tau:
        raise ValueError("part threshold must not exceed the object threshold")
    image = load_image(image_path)
    h, w, _ = image.shape
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    skipped = []
    for i, (x, y) in enumerate(clicks):
        if not (0 <= x < w and 0 <= y < h):
            skipped.append({"pixel": [x, y], "reason": "out of bounds"})
            continue
        obj = _flood_mask(image, x, y, object_tau)
        part = _flood_mask(image, x, y, part_tau)
        if not part[y, x] or not obj[y, x] or np.any(part > obj):
            skipped.append({"pixel": [x, y], "reason": "containment check failed"})
            continue
        obj_name = f"object_{i:03d}.bsbt"
        part_name = f"part_{i:03d}.bsbt"
        write_array(obj, out_dir / obj_name)
        write_array(part, out_dir / part_name)
        entries.append({"pixel": [int(x), int(y)], "object_mask": obj_name, "part_mask": part_name})
    manifest = {"mode": "nearest", "entries": entries, "skipped": skipped}
    path = out_dir / "seg2d.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def grid_clicks(width: int, height: int, per_side: int) -> List[Tuple[int, int]]:
    xs = np.linspace(0, width - 1, per_side).astype(int)
    ys = np.linspace(0, height - 1, per_side).astype(int)
    return [(int(x), int(y)) for y in ys for x in xs]


def extract_view_features(
    render_dir,
    out_dir,
    backbone_name: str = "hashpatch",
    channels: int = 64,
) -> Path:
    """Encode every rendered view listed in the renderer's camera manifest.

    Emits one BSBT feature image per view plus a views manifest the engine's
    distillation command consumes directly (camera parameters passed through).
    """
    render_dir = Path(render_dir)
    cameras_path = render_dir / "cameras.json"
    if not cameras_path.is_file():
        raise FileNotFoundError(f"no cameras.json in {render_dir}")
    cameras = json.loads(cameras_path.read_text())["cameras"]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backbone = make_backbone(backbone_name, channels)
    views = []
    for i, cam in enumerate(cameras):
        image = load_image(render_dir / cam["depth"])
        h, w, _ = image.shape
        if (w, h) != (cam["width"], cam["height"]):
            raise ValueError(
                f"view {i}: render is {w}x{h}, camera manifest says "
                f"{cam['width']}x{cam['height']}"
            )
        grid = backbone.grid_features(image)
        full = bilinear_upsample(grid, h, w)
        name = f"view_{i:03d}.bsbt"
        write_array(full, out_dir / name)
        views.append(
            {
                "features": name,
                "camera": {
                    k: cam[k]
                    for k in ("elevation", "azimuth", "radius", "fov", "width", "height")
                },
            }
        )
    path = out_dir / "views.json"
    path.write_text(json.dumps({"views": views}, indent=2, sort_keys=True) + "\n")
    return path
