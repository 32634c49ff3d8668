"""Planted correspondence instances with exact ground truth.

The image is split into vertical label bands and every band gets its own
orthonormal feature direction; vertices are assigned to bands in contiguous
blocks along a ribbon mesh. Because the construction is explicit, every
instance knows its true part, its true match, and (optionally) decoy vertices
engineered to win plain nearest-neighbor search while landing outside the
clicked segment on back-projection.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .matcher import ClickContext, DEFAULT_K
from .mesh import Mesh, make_mesh
from .segmenters import (
    LabelField2D,
    LabelField3D,
    Seg2DProvider,
    SyntheticSeg2D,
    SyntheticSeg3D,
)
from .tensor_io import (
    FeatureImage,
    Mask2D,
    Mask3D,
    TensorContainer,
    VertexFeatureField,
    write_tensor,
)


@dataclass(frozen=True)
class PlantedInstance:
    image_features: FeatureImage
    labels2d: LabelField2D
    labels3d: LabelField3D
    part_mask: Mask2D
    object_mask: Mask2D
    click: Tuple[int, int]
    vertex_features: VertexFeatureField
    mesh: Mesh
    gt_part: Tuple[int, ...]
    click_part: int
    decoys: Tuple[int, ...] = ()
    missing_labels: Tuple[int, ...] = ()

    def click_context(self, k: int = DEFAULT_K) -> ClickContext:
        return ClickContext(
            self.image_features,
            self.click,
            self.part_mask,
            self.object_mask,
            self.vertex_features,
            k,
        )

    def seg2d(self) -> Seg2DProvider:
        return SyntheticSeg2D(self.labels2d)

    def seg3d(self) -> SyntheticSeg3D:
        return SyntheticSeg3D(self.labels3d)

    def gt_mask3d(self) -> Mask3D:
        bits = np.zeros(self.mesh.vertex_count, dtype=np.uint8)
        bits[list(self.gt_part)] = 1
        return Mask3D(bits)


def ribbon_mesh(n: int) -> Mesh:
    """A triangle strip threading n vertices in index order."""
    xs = np.linspace(0.0, 1.0, max(n, 2))[:n]
    ys = 0.05 * (np.arange(n) % 2)
    verts = np.stack([xs, ys, np.zeros(n)], axis=1).astype(np.float32)
    faces = [(i, i + 1, i + 2) for i in range(n - 2)]
    return make_mesh(verts, np.array(faces, dtype=np.int64).reshape(-1, 3))


def _orthonormal_directions(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if count > dim:
        raise ValueError(f"need dim >= {count} to plant {count} orthogonal directions")
    m = rng.normal(size=(dim, dim))
    q, _ = np.linalg.qr(m)
    return q[:, :count].T  # (count, dim), orthonormal rows


def make_planted_instance(
    seed: int = 0,
    width: int = 24,
    height: int = 24,
    dim: int = 8,
    parts: int = 3,
    missing_parts: int = 0,
    verts_per_part: int = 6,
    decoys: int = 0,
    click_part: int = 1,
    noise: float = 0.0,
    background_rows: int = 0,
    invalid_vertices: int = 0,
) -> PlantedInstance:
    """Build one instance. ``decoys`` requires at least two labeled bands."""
    total_labels = parts + missing_parts
    if not (1 <= click_part <= total_labels):
        raise ValueError(f"click_part {click_part} out of range [1, {total_labels}]")
    if decoys and total_labels < 2:
        raise ValueError("decoys need a second band to host the texture spot")
    rng = np.random.default_rng(seed)

    # one direction per band, plus one for the texture spot that decoys chase
    dirs = _orthonormal_directions(dim, total_labels + (1 if decoys else 0), rng)

    labels = np.zeros((height, width), dtype=np.int64)
    band = width / total_labels
    for x in range(width):
        labels[:, x] = min(int(x / band), total_labels - 1) + 1
    if background_rows:
        labels[:background_rows, :] = 0

    feats = np.zeros((height, width, dim), dtype=np.float64)
    for lbl in range(1, total_labels + 1):
        feats[labels == lbl] = dirs[lbl - 1]

    cx = int((click_part - 0.5) * band)
    cy = background_rows + (height - background_rows) // 2
    trap_part = click_part + 1 if click_part + 1 <= total_labels else 1

    if decoys:
        # A small patch in another band carries a texture-only direction; the
        # decoy vertices resemble the clicked pixel more than the true part
        # does, yet their most similar pixel is the patch, outside the part.
        spot_dir = dirs[total_labels]
        sx = int((trap_part - 0.5) * band)
        sy = cy
        feats[sy : sy + 2, sx : sx + 2] = spot_dir
        alpha = math.radians(50.0)
        feats[cy, cx] = math.cos(alpha) * dirs[click_part - 1] + math.sin(alpha) * spot_dir
    if noise:
        feats += noise * rng.normal(size=feats.shape)

    n_real = parts * verts_per_part
    n = n_real + decoys + invalid_vertices
    labels3d = np.zeros(n, dtype=np.int64)
    vfeats = np.zeros((n, dim), dtype=np.float64)
    for p in range(parts):
        sl = slice(p * verts_per_part, (p + 1) * verts_per_part)
        labels3d[sl] = p + 1
        vfeats[sl] = dirs[p]
    decoy_ids = []
    for i in range(decoys):
        v = n_real + i
        eps = math.radians(2.0 * i)
        vfeats[v] = math.cos(eps) * dirs[total_labels] + math.sin(eps) * dirs[click_part - 1]
        labels3d[v] = trap_part if trap_part <= parts else 0
        decoy_ids.append(v)
    if noise:
        vfeats[: n_real + decoys] += noise * rng.normal(size=(n_real + decoys, dim))

    valid = np.ones(n, dtype=bool)
    if invalid_vertices:
        valid[n_real + decoys :] = False
        vfeats[n_real + decoys :] = 0.0

    part_mask = Mask2D((labels == click_part).astype(np.uint8))
    object_mask = Mask2D((labels > 0).astype(np.uint8))
    gt = tuple(int(v) for v in np.nonzero(labels3d == click_part)[0])

    return PlantedInstance(
        image_features=FeatureImage(feats.astype(np.float32)),
        labels2d=LabelField2D(labels),
        labels3d=LabelField3D(labels3d),
        part_mask=part_mask,
        object_mask=object_mask,
        click=(cx, cy),
        vertex_features=VertexFeatureField(vfeats.astype(np.float32), valid),
        mesh=ribbon_mesh(n),
        gt_part=gt,
        click_part=click_part,
        decoys=tuple(decoy_ids),
        missing_labels=tuple(range(parts + 1, total_labels + 1)),
    )


def make_missing_part_instance(seed: int = 0, **kwargs) -> PlantedInstance:
    """Instance whose clicked band has no vertex counterpart at all."""
    kwargs.setdefault("parts", 2)
    kwargs.setdefault("missing_parts", 1)
    parts = kwargs["parts"]
    kwargs["click_part"] = parts + 1  # click the band without 3D support
    return make_planted_instance(seed=seed, **kwargs)


def region_masks(instance: PlantedInstance) -> List[Tuple[Mask2D, bool]]:
    """Per-band masks flagged by whether the band has a 3D counterpart."""
    out = []
    lab = instance.labels2d.labels
    total = int(lab.max())
    for lbl in range(1, total + 1):
        has_counterpart = lbl not in instance.missing_labels
        out.append((Mask2D((lab == lbl).astype(np.uint8)), has_counterpart))
    return out


def write_obj(mesh: Mesh, path: Path) -> None:
    lines = [f"v {x:.8g} {y:.8g} {z:.8g}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def write_instance_bundle(
    instance: PlantedInstance, directory: Path, name: str
) -> Dict:
    """Write an instance's containers and return its manifest case entry."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def dump(stem: str, container: TensorContainer) -> str:
        fname = f"{name}_{stem}.bsbt"
        write_tensor(container, directory / fname)
        return fname

    feat = dump("feat", instance.image_features.to_container())
    part = dump("part", instance.part_mask.to_container())
    obj = dump("object", instance.object_mask.to_container())
    vfeat = dump("vfeat", instance.vertex_features.to_container())
    labels = dump(
        "labels", TensorContainer.from_array(instance.labels2d.labels.astype(np.uint8))
    )
    mesh_name = f"{name}_mesh.obj"
    write_obj(instance.mesh, directory / mesh_name)

    case = {
        "name": name,
        "image_features": feat,
        "part_mask": part,
        "object_mask": obj,
        "vertex_features": vfeat,
        "mesh": mesh_name,
        "click": [int(instance.click[0]), int(instance.click[1])],
        "gt_part": [int(v) for v in instance.gt_part],
        "seg2d": f"synthetic:{labels}",
    }

    regions = []
    for i, (mask, flag) in enumerate(region_masks(instance)):
        fname = f"{name}_region{i}.bsbt"
        write_tensor(mask.to_container(), directory / fname)
        regions.append({"mask": fname, "has_counterpart": flag})
    if regions:
        case["regions"] = regions
    return case


def write_manifest(directory: Path, cases: Sequence[Dict], filename: str = "manifest.json") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / filename
    path.write_text(json.dumps({"cases": list(cases)}, indent=2, sort_keys=True) + "\n")
    return path


def write_ppm_rgb(path: Path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.astype(np.uint8).tobytes())


_PALETTE = np.array(
    [
        (40, 40, 40),
        (214, 96, 77),
        (67, 147, 195),
        (90, 174, 97),
        (230, 180, 60),
        (153, 112, 171),
        (223, 130, 180),
    ],
    dtype=np.uint8,
)


def write_demo_bundle(
    directory: Path,
    seed: int = 7,
    k: int = DEFAULT_K,
    floodfill_tau: float = 0.5,
    **instance_kwargs,
) -> Path:
    """Write a self-contained session bundle and return its manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    instance_kwargs.setdefault("width", 48)
    instance_kwargs.setdefault("height", 48)
    instance_kwargs.setdefault("missing_parts", 1)
    instance_kwargs.setdefault("noise", 0.02)
    inst = make_planted_instance(seed=seed, **instance_kwargs)

    write_tensor(inst.image_features.to_container(), directory / "image_features.bsbt")
    write_tensor(inst.vertex_features.to_container(), directory / "vertex_features.bsbt")
    write_tensor(
        TensorContainer.from_array(inst.labels2d.labels.astype(np.uint8)),
        directory / "labels2d.bsbt",
    )
    write_obj(inst.mesh, directory / "mesh.obj")
    rgb = _PALETTE[inst.labels2d.labels % len(_PALETTE)]
    write_ppm_rgb(directory / "display.ppm", rgb)

    manifest = {
        "image_features": "image_features.bsbt",
        "vertex_features": "vertex_features.bsbt",
        "mesh": "mesh.obj",
        "seg2d": "synthetic:labels2d.bsbt",
        "seg3d": f"floodfill:{floodfill_tau}",
        "image": "display.ppm",
        "k": k,
    }
    path = directory / "session.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
