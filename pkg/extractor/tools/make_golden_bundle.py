#!/usr/bin/env python3
"""Regenerate the committed extractor test data.

Builds a photo-like 224x224 PNG, a small house mesh, and the golden bundle
(the image's hashpatch features, flood-fill masks for one click, and vertex
features distilled through the engine's renderer). Everything is seeded, so
re-running reproduces the committed bytes.

Run from the repository root with both packages installed:

    python3 extractor/tools/make_golden_bundle.py
"""

import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from bsb_extract.extract import (  # noqa: E402
    extract_image_features,
    extract_masks,
    extract_view_features,
)

DATA = ROOT / "tests" / "data"
SIZE = 224
CLICK = (112, 150)  # on the house wall
GOLDEN_DIM = 4


def make_test_image(path: Path) -> None:
    """A small synthetic photograph: sky, sun, ground, and a house."""
    rng = np.random.default_rng(99)
    img = np.zeros((SIZE, SIZE, 3))
    ys = np.linspace(0, 1, SIZE)[:, None]
    img[..., 0] = 0.35 + 0.25 * ys
    img[..., 1] = 0.55 + 0.15 * ys
    img[..., 2] = 0.9 - 0.3 * ys
    yy, xx = np.mgrid[0:SIZE, 0:SIZE]
    sun = (yy - 40) ** 2 + (xx - 180) ** 2 <= 18**2
    img[sun] = [0.98, 0.9, 0.55]
    ground = yy >= 176
    img[ground] = [0.33, 0.5, 0.25]
    wall = (yy >= 120) & (yy < 176) & (xx >= 80) & (xx < 150)
    img[wall] = [0.72, 0.6, 0.45]
    roof = (yy >= 90) & (yy < 120) & (np.abs(xx - 115) <= (yy - 88) * 1.2)
    img[roof] = [0.55, 0.25, 0.2]
    door = (yy >= 145) & (yy < 176) & (xx >= 105) & (xx < 122)
    img[door] = [0.35, 0.22, 0.12]
    img += rng.normal(scale=0.012, size=img.shape)
    img = np.clip(img, 0, 1)
    Image.fromarray((img * 255).round().astype(np.uint8)).save(path)
    print(f"{path.name}: {path.stat().st_size} bytes")


def make_house_mesh(path: Path) -> None:
    verts = [
        (-1, 0, -1), (1, 0, -1), (1, 0, 1), (-1, 0, 1),
        (-1, 1.2, -1), (1, 1.2, -1), (1, 1.2, 1), (-1, 1.2, 1),
        (0, 2.0, -1), (0, 2.0, 1),
    ]
    faces = [
        (0, 2, 1), (0, 3, 2),
        (0, 1, 5), (0, 5, 4), (2, 3, 7), (2, 7, 6),
        (1, 2, 6), (1, 6, 5), (3, 0, 4), (3, 4, 7),
        (4, 5, 8), (6, 7, 9),
        (5, 6, 9), (5, 9, 8), (7, 4, 8), (7, 8, 9),
    ]
    lines = [f"v {x} {y} {z}" for x, y, z in verts]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    path.write_text("\n".join(lines) + "\n")
    print(f"{path.name}: {len(verts)} vertices, {len(faces)} faces")


def make_golden(image_path: Path, mesh_path: Path) -> None:
    golden = DATA / "golden"
    golden.mkdir(parents=True, exist_ok=True)

    tensor, meta = extract_image_features(
        image_path, golden, backbone_name="hashpatch", channels=GOLDEN_DIM,
        stem="image_features",
    )
    print(f"{tensor.name}: {tensor.stat().st_size} bytes")

    manifest = extract_masks(image_path, [CLICK], golden / "masks")
    print(f"masks manifest: {manifest}")

    # render the mesh through the engine and distill view features onto it
    from bsb.cli import main as bsb_main

    render_dir = golden / "renders"
    code = bsb_main(
        [
            "render", "--mesh", str(mesh_path), "--out-dir", str(render_dir),
            "--random", "8", "--seed", "5", "--size", "112x112",
        ]
    )
    assert code == 0
    views = extract_view_features(render_dir, golden / "views", "hashpatch", GOLDEN_DIM)
    code = bsb_main(
        [
            "distill", "--mesh", str(mesh_path), "--views", str(views),
            "--out", str(golden / "vertex_features.bsbt"),
        ]
    )
    assert code == 0
    bundle = {
        "image": "../image.png",
        "mesh": "../house.obj",
        "click": list(CLICK),
        "image_features": "image_features.bsbt",
        "vertex_features": "vertex_features.bsbt",
        "seg2d": "masks/seg2d.json",
        "backbone": "hashpatch",
        "channels": GOLDEN_DIM,
    }
    (golden / "bundle.json").write_text(json.dumps(bundle, indent=2, sort_keys=True) + "\n")
    # renders and per-view features are regenerable and heavy; drop them
    import shutil

    shutil.rmtree(render_dir)
    shutil.rmtree(golden / "views")
    print("golden bundle written")


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    image_path = DATA / "image.png"
    mesh_path = DATA / "house.obj"
    make_test_image(image_path)
    make_house_mesh(mesh_path)
    make_golden(image_path, mesh_path)
