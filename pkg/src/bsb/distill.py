"""Lift per-view pixel features onto mesh vertices by visibility-aware averaging."""

import hashlib
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import BehindCameraError, FormatError, MatchError
from .mesh import Mesh
from .rasterizer import Camera, render, project_vertex
from .tensor_io import FeatureImage, VertexFeatureField


@dataclass(frozen=True)
class ViewFeatureSet:
    """Per-view feature images paired with the cameras that produced them."""

    views: Tuple[Tuple[Camera, FeatureImage], ...]

    def __post_init__(self):
        if not self.views:
            raise FormatError("a view set needs at least one view")
        d = self.views[0][1].dim
        for cam, feat in self.views:
            if feat.dim != d:
                raise FormatError(f"inconsistent feature dims: {feat.dim} != {d}")
            if (feat.width, feat.height) != (cam.width, cam.height):
                raise FormatError(
                    f"feature image {feat.width}x{feat.height} does not match "
                    f"camera render size {cam.width}x{cam.height}"
                )

    @property
    def dim(self) -> int:
        return self.views[0][1].dim

    def __len__(self) -> int:
        return len(self.views)


def _canonical_order(views: Sequence[Tuple[Camera, FeatureImage]]):
    # total order over views so summation is independent of input order
    def key(pair):
        cam, feat = pair
        digest = hashlib.sha256(feat.data.tobytes()).hexdigest()
        return (cam.elevation, cam.azimuth, cam.radius, cam.fov, cam.width, cam.height, digest)

    return sorted(views, key=key)


def distill_features(mesh: Mesh, views: ViewFeatureSet) -> VertexFeatureField:
    """Average each vertex's pixel feature across the views where it is visible.

    Features are summed in float64 in a canonical view order and cast to
    float32 at the end, so the result is identical under view permutation.
    Vertices never visible come back flagged invalid with an all-zero row.
    """
    n = mesh.vertex_count
    d = views.dim
    acc = np.zeros((n, d), dtype=np.float64)
    counts = np.zeros(n, dtype=np.int64)

    for cam, feat in _canonical_order(views.views):
        rmap = render(mesh, cam)
        for v in np.nonzero(rmap.visible)[0]:
            try:
                x, y, _ = project_vertex(cam, mesh.vertices[v])
            except BehindCameraError:
                continue
            rx, ry = int(round(x)), int(round(y))
            if 0 <= rx < feat.width and 0 <= ry < feat.height:
                acc[v] += feat.data[ry, rx].astype(np.float64)
                counts[v] += 1

    valid = counts > 0
    data = np.zeros((n, d), dtype=np.float32)
    if valid.any():
        data[valid] = (acc[valid] / counts[valid, None]).astype(np.float32)
    return VertexFeatureField(data, valid)


def feature_heatmap(field: VertexFeatureField, query: np.ndarray) -> np.ndarray:
    """Cosine similarity of every valid vertex against a query vector.

    Invalid (and zero-norm) vertices get a -inf sentinel so they can never
    rank above a real score.
    """
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != field.dim:
        raise MatchError(f"query dim {query.shape[0]} != field dim {field.dim}")
    qn = np.linalg.norm(query)
    if qn == 0:
        raise MatchError("zero-norm query vector")
    data = field.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=1)
    eligible = field.valid & (norms > 0)
    out = np.full(field.count, -np.inf, dtype=np.float64)
    if eligible.any():
        sims = data[eligible] @ query / (norms[eligible] * qn)
        out[eligible] = np.clip(sims, -1.0, 1.0)
    return out.astype(np.float32)
