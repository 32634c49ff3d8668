"""Segmentation-level relaxed mutual matching between pixels and vertices.

A clicked pixel is matched to the vertex whose most similar in-object pixel
falls inside the click's part mask and whose segment has maximal overlap with
it. All argmax ties are broken deterministically: similarity ties by lower
vertex index, pixel ties in row-major order, overlap ties by earlier
candidate rank.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import MatchError, ProviderError
from .tensor_io import FeatureImage, Mask2D, Mask3D, VertexFeatureField

logger = logging.getLogger(__name__)

DEFAULT_K = 100


@dataclass(frozen=True)
class ClickContext:
    """Everything a forward pixel-to-vertex match needs."""

    image_features: FeatureImage
    click: Tuple[int, int]
    part_mask: Mask2D
    object_mask: Mask2D
    vertex_features: VertexFeatureField
    k: int = DEFAULT_K

    def __post_init__(self):
        if self.k < 1:
            raise MatchError(f"k must be >= 1, got {self.k}")
        fh, fw = self.image_features.height, self.image_features.width
        for mask, label in ((self.part_mask, "part"), (self.object_mask, "object")):
            if (mask.height, mask.width) != (fh, fw):
                raise MatchError(f"{label} mask dims do not match the feature image")
        x, y = self.click
        if not self.image_features.in_bounds(x, y):
            raise MatchError(f"click ({x}, {y}) outside image bounds")
        if not self.part_mask.contains(x, y):
            raise MatchError(f"click ({x}, {y}) not inside the part mask")
        if not self.part_mask.is_subset_of(self.object_mask):
            raise MatchError("part mask is not contained in the object mask")
        if self.image_features.dim != self.vertex_features.dim:
            raise MatchError(
                f"feature dims differ: image {self.image_features.dim}, "
                f"vertices {self.vertex_features.dim}"
            )


@dataclass(frozen=True)
class CandidateReport:
    """Diagnostics for one candidate vertex considered during matching."""

    vertex: int
    similarity: float
    pixel: Optional[Tuple[int, int]]  # most similar in-object pixel
    in_part: bool
    iou: Optional[float]
    note: Optional[str] = None


@dataclass(frozen=True)
class MatchResult:
    vertex: Optional[int]
    pixel: Optional[Tuple[int, int]]
    iou: Optional[float]
    candidates: Tuple[CandidateReport, ...] = field(default_factory=tuple)

    @property
    def matched(self) -> bool:
        return self.vertex is not None


@dataclass(frozen=True)
class ReverseCandidateReport:
    pixel: Tuple[int, int]
    similarity: float
    vertex: Optional[int]  # most similar in-scope vertex
    in_mask: bool
    iou: Optional[float]
    note: Optional[str] = None


@dataclass(frozen=True)
class ReverseMatchResult:
    pixel: Optional[Tuple[int, int]]
    vertex: Optional[int]  # the matched pixel's nearest vertex
    iou: Optional[float]
    candidates: Tuple[ReverseCandidateReport, ...] = field(default_factory=tuple)

    @property
    def matched(self) -> bool:
        return self.pixel is not None


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise MatchError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise MatchError("zero-norm vector in cosine similarity")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _click_feature(ctx: ClickContext) -> np.ndarray:
    x, y = ctx.click
    f = ctx.image_features.data[y, x].astype(np.float64)
    if np.linalg.norm(f) == 0:
        raise MatchError(f"clicked pixel ({x}, {y}) has a zero-norm feature")
    return f


def _vertex_similarities(ctx: ClickContext, query: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Similarity of every vertex to a pixel feature; ineligible rows get -inf."""
    data = ctx.vertex_features.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=1)
    eligible = ctx.vertex_features.valid & (norms > 0)
    sims = np.full(ctx.vertex_features.count, -np.inf, dtype=np.float64)
    if eligible.any():
        qn = np.linalg.norm(query)
        sims[eligible] = np.clip(data[eligible] @ query / (norms[eligible] * qn), -1.0, 1.0)
    return sims, eligible


def top_k_candidates(ctx: ClickContext) -> List[int]:
    """The k eligible vertices most similar to the clicked pixel, descending.

    Ties break toward the lower vertex index; fewer than k come back when
    fewer vertices are eligible.
    """
    query = _click_feature(ctx)
    sims, eligible = _vertex_similarities(ctx, query)
    if not eligible.any():
        raise MatchError("no valid vertex features to match against")
    order = np.lexsort((np.arange(sims.shape[0]), -sims))
    ranked = [int(v) for v in order if eligible[v]]
    return ranked[: ctx.k]


def nearest_pixel(vertex: int, ctx: ClickContext) -> Tuple[int, int]:
    """Most similar in-object pixel to a vertex feature, row-major on ties."""
    ys, xs = np.nonzero(ctx.object_mask.bits)
    if ys.size == 0:
        raise MatchError("object mask is empty")
    if not ctx.vertex_features.valid[vertex]:
        raise MatchError(f"vertex {vertex} has no valid feature")
    vf = ctx.vertex_features.data[vertex].astype(np.float64)
    vn = np.linalg.norm(vf)
    if vn == 0:
        raise MatchError(f"vertex {vertex} has a zero-norm feature")
    feats = ctx.image_features.data[ys, xs].astype(np.float64)
    norms = np.linalg.norm(feats, axis=1)
    sims = np.full(ys.shape[0], -np.inf, dtype=np.float64)
    ok = norms > 0
    if not ok.any():
        raise MatchError("all in-object pixel features are zero")
    sims[ok] = np.clip(feats[ok] @ vf / (norms[ok] * vn), -1.0, 1.0)
    i = int(np.argmax(sims))  # first max == row-major tie rule
    return int(xs[i]), int(ys[i])


def mask_iou(a: Mask2D, b: Mask2D) -> float:
    """Intersection over union of two pixel masks; 0 when the union is empty."""
    if a.bits.shape != b.bits.shape:
        raise MatchError(f"mask dims differ: {a.bits.shape} vs {b.bits.shape}")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    return 0.0 if union == 0 else inter / union


def mask3d_iou(a: Mask3D, b: Mask3D) -> float:
    if a.bits.shape != b.bits.shape:
        raise MatchError(f"mask lengths differ: {a.count} vs {b.count}")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    return 0.0 if union == 0 else inter / union


def bsb_match(ctx: ClickContext, seg2d) -> MatchResult:
    """Find the clicked pixel's best segmentation buddy vertex.

    For each candidate vertex (most similar to the click, in rank order),
    locate its most similar in-object pixel; drop the candidate if that pixel
    leaves the click's part mask; otherwise segment at that pixel and score
    the overlap with the part mask. The surviving candidate with maximal
    overlap wins; no survivors means no match. Provider failures discard the
    candidate with a recorded diagnostic.
    """
    query = _click_feature(ctx)
    sims, _ = _vertex_similarities(ctx, query)
    candidates = top_k_candidates(ctx)

    reports: List[CandidateReport] = []
    memo: Dict[Tuple[int, int], Mask2D] = {}
    best: Optional[Tuple[int, Tuple[int, int], float]] = None

    for v in candidates:
        sim = float(sims[v])
        try:
            q = nearest_pixel(v, ctx)
        except MatchError as exc:
            reports.append(CandidateReport(v, sim, None, False, None, str(exc)))
            continue
        in_part = ctx.part_mask.contains(*q)
        if not in_part:
            reports.append(CandidateReport(v, sim, q, False, None))
            continue
        try:
            if q not in memo:
                _, memo[q] = seg2d.query(*q)
            candidate_mask = memo[q]
            iou = mask_iou(ctx.part_mask, candidate_mask)
        except (ProviderError, MatchError) as exc:
            reports.append(CandidateReport(v, sim, q, True, None, f"provider failed: {exc}"))
            continue
        reports.append(CandidateReport(v, sim, q, True, iou))
        if best is None or iou > best[2]:
            best = (v, q, iou)

    if best is None:
        return MatchResult(None, None, None, tuple(reports))
    return MatchResult(best[0], best[1], best[2], tuple(reports))


def nn_baseline(ctx: ClickContext) -> int:
    """Plain nearest-neighbor vertex for the clicked pixel."""
    query = _click_feature(ctx)
    sims, eligible = _vertex_similarities(ctx, query)
    if not eligible.any():
        raise MatchError("no valid vertex features to match against")
    order = np.lexsort((np.arange(sims.shape[0]), -sims))
    for v in order:
        if eligible[v]:
            return int(v)
    raise MatchError("unreachable")


def random_candidate_baseline(ctx: ClickContext, seed: int) -> int:
    """Uniform seeded choice among the click's candidate vertices."""
    candidates = top_k_candidates(ctx)
    rng = np.random.default_rng(seed)
    return int(candidates[int(rng.integers(len(candidates)))])


def _pixel_similarities(
    image_features: FeatureImage, query: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Similarity of every pixel (flattened row-major) to a vertex feature."""
    h, w, d = image_features.data.shape
    flat = image_features.data.reshape(h * w, d).astype(np.float64)
    norms = np.linalg.norm(flat, axis=1)
    ok = norms > 0
    sims = np.full(h * w, -np.inf, dtype=np.float64)
    if ok.any():
        qn = np.linalg.norm(query)
        sims[ok] = np.clip(flat[ok] @ query / (norms[ok] * qn), -1.0, 1.0)
    return sims, ok


def bsb_match_reverse(
    image_features: FeatureImage,
    vertex_features: VertexFeatureField,
    vertex: int,
    mask3d: Mask3D,
    seg3d,
    k: int = DEFAULT_K,
    scope: Optional[Mask3D] = None,
) -> ReverseMatchResult:
    """Vertex-to-pixel matching: the forward algorithm with the roles swapped.

    Candidate pixels are the k most similar to the clicked vertex's feature.
    A candidate survives when its most similar vertex (searched within
    ``scope``, all valid vertices by default) lies inside the clicked
    vertex's 3D mask; survivors are scored by vertex-set overlap between that
    mask and the 3D segment grown from the candidate's nearest vertex.
    """
    if k < 1:
        raise MatchError(f"k must be >= 1, got {k}")
    n = vertex_features.count
    if not (0 <= vertex < n):
        raise MatchError(f"vertex {vertex} out of range [0, {n})")
    if mask3d.count != n:
        raise MatchError("3D mask length does not match the vertex count")
    if not vertex_features.valid[vertex]:
        raise MatchError(f"vertex {vertex} has no valid feature")
    vf = vertex_features.data[vertex].astype(np.float64)
    if np.linalg.norm(vf) == 0:
        raise MatchError(f"vertex {vertex} has a zero-norm feature")

    h, w = image_features.height, image_features.width
    sims, ok = _pixel_similarities(image_features, vf)
    if not ok.any():
        raise MatchError("image has no nonzero pixel features")
    order = np.lexsort((np.arange(h * w), -sims))
    pixel_candidates = [int(i) for i in order if ok[i]][:k]

    vdata = vertex_features.data.astype(np.float64)
    vnorms = np.linalg.norm(vdata, axis=1)
    in_scope = vertex_features.valid & (vnorms > 0)
    if scope is not None:
        if scope.count != n:
            raise MatchError("scope mask length does not match the vertex count")
        in_scope &= scope.bits.astype(bool)
    if not in_scope.any():
        raise MatchError("no vertex is eligible within the search scope")

    reports: List[ReverseCandidateReport] = []
    memo: Dict[int, Mask3D] = {}
    best: Optional[Tuple[Tuple[int, int], int, float]] = None

    for flat in pixel_candidates:
        qy, qx = divmod(flat, w)
        pix = (int(qx), int(qy))
        sim = float(sims[flat])
        pf = image_features.data[qy, qx].astype(np.float64)
        vsims = np.full(n, -np.inf, dtype=np.float64)
        vsims[in_scope] = np.clip(
            vdata[in_scope] @ pf / (vnorms[in_scope] * np.linalg.norm(pf)), -1.0, 1.0
        )
        u = int(np.lexsort((np.arange(n), -vsims))[0])
        in_mask = bool(mask3d.bits[u])
        if not in_mask:
            reports.append(ReverseCandidateReport(pix, sim, u, False, None))
            continue
        try:
            if u not in memo:
                memo[u] = seg3d.query(u)
            iou = mask3d_iou(mask3d, memo[u])
        except (ProviderError, MatchError) as exc:
            reports.append(
                ReverseCandidateReport(pix, sim, u, True, None, f"provider failed: {exc}")
            )
            continue
        reports.append(ReverseCandidateReport(pix, sim, u, True, iou))
        if best is None or iou > best[2]:
            best = (pix, u, iou)

    if best is None:
        return ReverseMatchResult(None, None, None, tuple(reports))
    return ReverseMatchResult(best[0], best[1], best[2], tuple(reports))
