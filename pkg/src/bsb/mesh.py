"""Triangle meshes: OBJ loading, normalization, and adjacency flood fill."""

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Tuple, Union

import numpy as np

from .errors import MeshError
from .tensor_io import Mask3D


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with vertex adjacency derived from shared face edges."""

    vertices: np.ndarray  # float32 (n, 3)
    faces: np.ndarray  # int64 (m, 3)
    adjacency: Tuple[Tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def face_count(self) -> int:
        return self.faces.shape[0]

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self.adjacency[v]


def _build_adjacency(n: int, faces: np.ndarray) -> Tuple[Tuple[int, ...], ...]:
    adj: List[set] = [set() for _ in range(n)]
    for a, b, c in faces:
        adj[a].update((b, c))
        adj[b].update((a, c))
        adj[c].update((a, b))
    return tuple(tuple(sorted(s)) for s in adj)


def make_mesh(vertices: np.ndarray, faces: np.ndarray) -> Mesh:
    """Construct a mesh from arrays, validating indices and dropping degenerate faces."""
    vertices = np.asarray(vertices, dtype=np.float32)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError(f"vertices must be (n, 3), got {vertices.shape}")
    if vertices.shape[0] == 0:
        raise MeshError("empty mesh")
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3) if len(faces) else np.zeros((0, 3), np.int64)
    n = vertices.shape[0]
    if faces.size and (faces.min() < 0 or faces.max() >= n):
        raise MeshError(f"face index out of range [0, {n})")
    keep = [
        (a, b, c)
        for a, b, c in faces.tolist()
        if a != b and b != c and a != c
    ]
    faces = np.array(keep, dtype=np.int64).reshape(-1, 3)
    return Mesh(vertices, faces, _build_adjacency(n, faces))


def load_mesh(path: Union[str, Path]) -> Mesh:
    """Load a triangle OBJ; polygons are fan-triangulated from their first vertex.

    Only "v" and "f" records are honored; texture/normal records and comments
    are skipped. Face indices are 1-based and may carry "/..." suffixes.
    """
    path = Path(path)
    if not path.is_file():
        raise MeshError(f"mesh file not found: {path}")
    verts: List[Tuple[float, float, float]] = []
    tris: List[Tuple[int, int, int]] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshError(f"{path}:{lineno}: vertex record needs 3 coordinates")
            try:
                verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError as exc:
                raise MeshError(f"{path}:{lineno}: non-numeric vertex coordinate") from exc
        elif tag == "f":
            if len(parts) < 4:
                raise MeshError(f"{path}:{lineno}: face record needs >= 3 indices")
            idx = []
            for token in parts[1:]:
                token = token.split("/", 1)[0]
                try:
                    i = int(token)
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: non-numeric face index {token!r}") from exc
                if i == 0:
                    raise MeshError(f"{path}:{lineno}: face indices are 1-based")
                idx.append(i - 1 if i > 0 else len(verts) + i)
            # fan from the first vertex
            for k in range(1, len(idx) - 1):
                tris.append((idx[0], idx[k], idx[k + 1]))
        # everything else (vt, vn, o, g, usemtl, ...) is ignored
    if not verts:
        raise MeshError(f"{path}: empty mesh")
    return make_mesh(np.array(verts, dtype=np.float32), np.array(tris, dtype=np.int64))


def normalize_mesh(mesh: Mesh) -> Mesh:
    """Center the bounding box at the origin and scale its longest edge to 1."""
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0:
        raise MeshError("zero-extent mesh cannot be normalized")
    center = (lo + hi) / 2.0
    verts = ((mesh.vertices - center) / extent).astype(np.float32)
    return Mesh(verts, mesh.faces, mesh.adjacency)


def connected_component(
    mesh: Mesh, seed: int, member: Callable[[int], bool]
) -> Mask3D:
    """Vertices reachable from ``seed`` through adjacency, restricted to ``member``."""
    n = mesh.vertex_count
    if not (0 <= seed < n):
        raise MeshError(f"seed {seed} out of range [0, {n})")
    if not member(seed):
        raise MeshError(f"seed {seed} does not satisfy the membership predicate")
    bits = np.zeros(n, dtype=np.uint8)
    bits[seed] = 1
    queue = deque([seed])
    while queue:
        v = queue.popleft()
        for u in mesh.adjacency[v]:
            if not bits[u] and member(u):
                bits[u] = 1
                queue.append(u)
    return Mask3D(bits)
