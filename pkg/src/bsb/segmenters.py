"""Pluggable 2D/3D segmentation providers behind uniform query interfaces.

Providers answer point queries with masks. Three families ship here:
synthetic providers backed by label fields (exact ground truth for tests),
file-backed providers that replay precomputed masks, and a reference 3D
segmenter that grows a region over mesh adjacency by feature similarity.
"""

import json
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .errors import FormatError, ProviderError
from .matcher import ClickContext, MatchResult, bsb_match
from .mesh import Mesh, connected_component
from .tensor_io import Mask2D, Mask3D, TensorContainer, VertexFeatureField, read_tensor

DEFAULT_FLOODFILL_TAU = 0.85


@dataclass(frozen=True)
class LabelField2D:
    """Integer label per pixel; label 0 is background."""

    labels: np.ndarray  # (h, w), non-negative integers

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise FormatError(f"label field must be (h, w), got {self.labels.shape}")
        if self.labels.min(initial=0) < 0:
            raise FormatError("labels must be non-negative")

    @classmethod
    def from_container(cls, t: TensorContainer) -> "LabelField2D":
        if len(t.dims) != 2:
            raise FormatError(f"expected [h, w] container, got dims {t.dims}")
        return cls(t.to_array().astype(np.int64))


@dataclass(frozen=True)
class LabelField3D:
    """Integer label per vertex."""

    labels: np.ndarray  # (n,)

    def __post_init__(self):
        if self.labels.ndim != 1:
            raise FormatError(f"label field must be flat, got {self.labels.shape}")
        if self.labels.min(initial=0) < 0:
            raise FormatError("labels must be non-negative")


class Seg2DProvider:
    """query(x, y) -> (object mask, part mask) for a pixel click."""

    serial_only = False
    memoizable = True

    def query(self, x: int, y: int) -> Tuple[Mask2D, Mask2D]:
        raise NotImplementedError


class Seg3DProvider:
    """query(vertex) -> vertex mask for a vertex click."""

    serial_only = False
    memoizable = True

    def query(self, vertex: int) -> Mask3D:
        raise NotImplementedError


class SyntheticSeg2D(Seg2DProvider):
    """Exact masks from a ground-truth label field."""

    def __init__(self, labels: LabelField2D):
        self.labels = labels

    def query(self, x: int, y: int) -> Tuple[Mask2D, Mask2D]:
        lab = self.labels.labels
        h, w = lab.shape
        if not (0 <= x < w and 0 <= y < h):
            raise ProviderError(f"pixel ({x}, {y}) out of bounds {w}x{h}")
        value = int(lab[y, x])
        if value == 0:
            raise ProviderError(f"pixel ({x}, {y}) is background")
        part = (lab == value).astype(np.uint8)
        obj = (lab > 0).astype(np.uint8)
        return Mask2D(obj), Mask2D(part)


def synthetic_seg2d(labels: LabelField2D) -> Seg2DProvider:
    return SyntheticSeg2D(labels)


class StaticSeg2D(Seg2DProvider):
    """Answers every query with one fixed (object, part) mask pair.

    Useful when a dataset ships exactly one segmentation per image; queries
    outside the part mask are rejected to keep the provider contract honest.
    """

    def __init__(self, object_mask: Mask2D, part_mask: Mask2D):
        if not part_mask.is_subset_of(object_mask):
            raise ProviderError("part mask must be contained in the object mask")
        self.object_mask = object_mask
        self.part_mask = part_mask

    def query(self, x: int, y: int) -> Tuple[Mask2D, Mask2D]:
        if not self.part_mask.contains(x, y):
            raise ProviderError(f"pixel ({x}, {y}) outside the static part mask")
        return self.object_mask, self.part_mask


class SyntheticSeg3D(Seg3DProvider):
    """Exact vertex masks from a ground-truth 3D label field."""

    def __init__(self, labels: LabelField3D):
        self.labels = labels

    def query(self, vertex: int) -> Mask3D:
        lab = self.labels.labels
        if not (0 <= vertex < lab.shape[0]):
            raise ProviderError(f"vertex {vertex} out of range")
        return Mask3D((lab == lab[vertex]).astype(np.uint8))


class FloodFillSeg3D(Seg3DProvider):
    """Reference vertex-click segmenter: connected region where feature
    similarity to the seed stays above a threshold."""

    def __init__(self, field: VertexFeatureField, mesh: Mesh, tau: float = DEFAULT_FLOODFILL_TAU):
        if not (-1.0 <= tau <= 1.0):
            raise ProviderError(f"tau must be in [-1, 1], got {tau}")
        if field.count != mesh.vertex_count:
            raise ProviderError("feature field and mesh vertex counts differ")
        self.field = field
        self.mesh = mesh
        self.tau = tau

    def query(self, vertex: int) -> Mask3D:
        if not (0 <= vertex < self.field.count):
            raise ProviderError(f"vertex {vertex} out of range")
        if not self.field.valid[vertex]:
            raise ProviderError(f"vertex {vertex} has no valid feature")
        seed_f = self.field.data[vertex]
        if np.linalg.norm(seed_f) == 0:
            raise ProviderError(f"vertex {vertex} has a zero-norm feature")

        seed64 = seed_f.astype(np.float64)
        data = self.field.data.astype(np.float64)
        norms = np.linalg.norm(data, axis=1)
        eligible = self.field.valid & (norms > 0)
        sims = np.full(self.field.count, -np.inf)
        sims[eligible] = np.clip(
            data[eligible] @ seed64 / (norms[eligible] * np.linalg.norm(seed64)), -1.0, 1.0
        )
        member_ok = eligible & (sims >= self.tau)
        member_ok[vertex] = True  # the seed always belongs to its own region
        return connected_component(self.mesh, vertex, lambda u: bool(member_ok[u]))


def floodfill_seg3d(
    field: VertexFeatureField, mesh: Mesh, tau: float = DEFAULT_FLOODFILL_TAU
) -> Seg3DProvider:
    return FloodFillSeg3D(field, mesh, tau)


class FileBackedSeg2D(Seg2DProvider):
    """Replays stored (object, part) mask pairs indexed by pixel.

    Exact mode errors on unknown pixels; nearest mode answers with the
    closest indexed pixel (Euclidean; ties by squared distance, then y, x).
    """

    serial_only = False

    def __init__(self, manifest_path: Union[str, Path], mode: Optional[str] = None):
        manifest_path = Path(manifest_path)
        if not manifest_path.is_file():
            raise ProviderError(f"provider manifest not found: {manifest_path}")
        try:
            doc = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as exc:
            raise ProviderError(f"provider manifest is not valid JSON: {exc}") from exc
        self.mode = mode or doc.get("mode", "exact")
        if self.mode not in ("exact", "nearest"):
            raise ProviderError(f"unknown mode {self.mode!r}")
        base = manifest_path.parent
        self.entries: Dict[Tuple[int, int], Tuple[Path, Path]] = {}
        for e in doc.get("entries", []):
            px = tuple(int(c) for c in e["pixel"])
            obj = Path(e["object_mask"])
            part = Path(e["part_mask"])
            self.entries[px] = (
                obj if obj.is_absolute() else base / obj,
                part if part.is_absolute() else base / part,
            )
        if not self.entries:
            raise ProviderError(f"provider manifest has no entries: {manifest_path}")
        self._cache: Dict[Tuple[int, int], Tuple[Mask2D, Mask2D]] = {}
        self._lock = threading.Lock()

    def _load(self, key: Tuple[int, int]) -> Tuple[Mask2D, Mask2D]:
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        obj_path, part_path = self.entries[key]
        obj = Mask2D.from_container(read_tensor(obj_path))
        part = Mask2D.from_container(read_tensor(part_path))
        if obj.bits.shape != part.bits.shape:
            raise ProviderError(f"mask dims differ for key {key}")
        if not part.is_subset_of(obj):
            raise ProviderError(f"stored part mask not inside object mask for key {key}")
        with self._lock:
            self._cache[key] = (obj, part)
        return obj, part

    def query(self, x: int, y: int) -> Tuple[Mask2D, Mask2D]:
        key = (int(x), int(y))
        if key in self.entries:
            return self._load(key)
        if self.mode == "exact":
            raise ProviderError(f"no stored masks for pixel {key}")
        best = min(
            self.entries,
            key=lambda p: ((p[0] - key[0]) ** 2 + (p[1] - key[1]) ** 2, p[1], p[0]),
        )
        return self._load(best)


def file_backed_seg2d(manifest_path: Union[str, Path], mode: Optional[str] = None) -> Seg2DProvider:
    return FileBackedSeg2D(manifest_path, mode)


class FileBackedSeg3D(Seg3DProvider):
    """Replays stored vertex masks; nearest mode walks adjacency hops."""

    def __init__(
        self,
        manifest_path: Union[str, Path],
        mode: Optional[str] = None,
        mesh: Optional[Mesh] = None,
    ):
        manifest_path = Path(manifest_path)
        if not manifest_path.is_file():
            raise ProviderError(f"provider manifest not found: {manifest_path}")
        try:
            doc = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as exc:
            raise ProviderError(f"provider manifest is not valid JSON: {exc}") from exc
        self.mode = mode or doc.get("mode", "exact")
        if self.mode not in ("exact", "nearest"):
            raise ProviderError(f"unknown mode {self.mode!r}")
        if self.mode == "nearest" and mesh is None:
            raise ProviderError("nearest mode needs a mesh for hop distances")
        base = manifest_path.parent
        self.mesh = mesh
        self.entries: Dict[int, Path] = {}
        for e in doc.get("entries", []):
            p = Path(e["mask"])
            self.entries[int(e["vertex"])] = p if p.is_absolute() else base / p
        if not self.entries:
            raise ProviderError(f"provider manifest has no entries: {manifest_path}")
        self._cache: Dict[int, Mask3D] = {}
        self._lock = threading.Lock()

    def _load(self, key: int) -> Mask3D:
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        mask = Mask3D.from_container(read_tensor(self.entries[key]))
        with self._lock:
            self._cache[key] = mask
        return mask

    def _nearest_key(self, vertex: int) -> int:
        # breadth-first hop distance; ties resolved toward the lower key index
        seen = {vertex}
        frontier = deque([vertex])
        while frontier:
            level = sorted(frontier)
            hits = [v for v in level if v in self.entries]
            if hits:
                return hits[0]
            nxt = deque()
            for v in level:
                for u in self.mesh.adjacency[v]:
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
            frontier = nxt
        raise ProviderError(f"no indexed vertex reachable from {vertex}")

    def query(self, vertex: int) -> Mask3D:
        vertex = int(vertex)
        if vertex in self.entries:
            return self._load(vertex)
        if self.mode == "exact":
            raise ProviderError(f"no stored mask for vertex {vertex}")
        return self._load(self._nearest_key(vertex))


def file_backed_seg3d(
    manifest_path: Union[str, Path], mode: Optional[str] = None, mesh: Optional[Mesh] = None
) -> Seg3DProvider:
    return FileBackedSeg3D(manifest_path, mode, mesh)


def correspond(
    ctx: ClickContext, seg2d: Seg2DProvider, seg3d: Seg3DProvider
) -> Tuple[MatchResult, Mask3D]:
    """Full pixel-to-part pipeline: match, then segment the shape at the match.

    When no vertex matches, the 3D mask comes back empty, signaling that the
    clicked region has no geometric counterpart.
    """
    result = bsb_match(ctx, seg2d)
    if result.vertex is None:
        return result, Mask3D.empty(ctx.vertex_features.count)
    return result, seg3d.query(result.vertex)


def parse_seg2d_spec(spec: str, base_dir: Optional[Path] = None) -> Seg2DProvider:
    """Build a 2D provider from a spec string.

    Grammar: ``synthetic:<labels.bsbt>`` | ``files:<manifest.json>[:exact|nearest]``
    | ``static:<object.bsbt>:<part.bsbt>``.
    """
    parts = spec.split(":")
    kind = parts[0]

    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() or base_dir is None else base_dir / path

    if kind == "synthetic" and len(parts) == 2:
        return SyntheticSeg2D(LabelField2D.from_container(read_tensor(resolve(parts[1]))))
    if kind == "files" and len(parts) in (2, 3):
        mode = parts[2] if len(parts) == 3 else None
        return FileBackedSeg2D(resolve(parts[1]), mode)
    if kind == "static" and len(parts) == 3:
        return StaticSeg2D(
            Mask2D.from_container(read_tensor(resolve(parts[1]))),
            Mask2D.from_container(read_tensor(resolve(parts[2]))),
        )
    raise ProviderError(f"unrecognized 2D provider spec: {spec!r}")


def parse_seg3d_spec(
    spec: str,
    base_dir: Optional[Path] = None,
    mesh: Optional[Mesh] = None,
    field: Optional[VertexFeatureField] = None,
) -> Seg3DProvider:
    """Build a 3D provider from a spec string.

    Grammar: ``floodfill:<tau>`` | ``files:<manifest.json>[:exact|nearest]``.
    """
    parts = spec.split(":")
    kind = parts[0]

    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() or base_dir is None else base_dir / path

    if kind == "floodfill" and len(parts) in (1, 2):
        if mesh is None or field is None:
            raise ProviderError("floodfill provider needs a mesh and vertex features")
        tau = float(parts[1]) if len(parts) == 2 else DEFAULT_FLOODFILL_TAU
        return FloodFillSeg3D(field, mesh, tau)
    if kind == "files" and len(parts) in (2, 3):
        mode = parts[2] if len(parts) == 3 else None
        return FileBackedSeg3D(resolve(parts[1]), mode, mesh)
    raise ProviderError(f"unrecognized 3D provider spec: {spec!r}")
