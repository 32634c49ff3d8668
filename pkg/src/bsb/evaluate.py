"""Evaluation protocols: success rates, candidate-count sweeps, and
overlap-fidelity statistics over dataset manifests."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import BsbError, EvalError, MatchError, ProviderError
from .matcher import (
    ClickContext,
    DEFAULT_K,
    bsb_match,
    nn_baseline,
    random_candidate_baseline,
)
from .mesh import Mesh
from .rasterizer import Camera, project_vertex, render
from .segmenters import LabelField3D, Seg2DProvider, StaticSeg2D, parse_seg2d_spec
from .tensor_io import (
    DatasetManifest,
    FeatureImage,
    ManifestCase,
    Mask2D,
    VertexFeatureField,
    read_tensor,
)

logger = logging.getLogger(__name__)

METHODS = ("bsb", "nn", "random")


@dataclass(frozen=True)
class CorrespondenceCase:
    """A fully materialized evaluation instance."""

    name: str
    image_features: FeatureImage
    part_mask: Mask2D
    object_mask: Mask2D
    vertex_features: VertexFeatureField
    click: Tuple[int, int]
    gt_part: Tuple[int, ...]
    seg2d: Seg2DProvider
    regions: Tuple[Tuple[Mask2D, bool], ...] = ()

    def context(self, k: int) -> ClickContext:
        return ClickContext(
            self.image_features,
            self.click,
            self.part_mask,
            self.object_mask,
            self.vertex_features,
            k,
        )


@dataclass(frozen=True)
class CaseOutcome:
    name: str
    outcome: str  # "hit" | "miss" | "no_match" | "error"
    vertex: Optional[int] = None
    iou: Optional[float] = None
    diagnostic: Optional[str] = None

    @property
    def is_hit(self) -> bool:
        return self.outcome == "hit"


@dataclass(frozen=True)
class EvalReport:
    method: str
    k: int
    seed: Optional[int]
    cases: Tuple[CaseOutcome, ...]

    @property
    def case_count(self) -> int:
        return len(self.cases)

    @property
    def hits(self) -> int:
        return sum(1 for c in self.cases if c.is_hit)

    @property
    def misses(self) -> int:
        return self.case_count - self.hits

    @property
    def no_match_count(self) -> int:
        return sum(1 for c in self.cases if c.outcome == "no_match")

    @property
    def error_count(self) -> int:
        return sum(1 for c in self.cases if c.outcome == "error")

    @property
    def success_rate(self) -> float:
        return self.hits / self.case_count

    def to_dict(self) -> Dict:
        return {
            "method": self.method,
            "k": self.k,
            "seed": self.seed,
            "cases": [
                {
                    "name": c.name,
                    "outcome": c.outcome,
                    "vertex": c.vertex,
                    "iou": c.iou,
                    "diagnostic": c.diagnostic,
                }
                for c in self.cases
            ],
            "hits": self.hits,
            "misses": self.misses,
            "no_match": self.no_match_count,
            "errors": self.error_count,
            "success_rate": self.success_rate,
        }


def load_case(case: ManifestCase) -> CorrespondenceCase:
    """Materialize one manifest case; without a provider spec the case's own
    masks answer every segmentation query."""
    feat = FeatureImage.from_container(read_tensor(case.image_features))
    part = Mask2D.from_container(read_tensor(case.part_mask))
    obj = Mask2D.from_container(read_tensor(case.object_mask))
    vfield = VertexFeatureField.from_container(read_tensor(case.vertex_features))
    if case.seg2d:
        provider = parse_seg2d_spec(case.seg2d, base_dir=case.image_features.parent)
    else:
        provider = StaticSeg2D(obj, part)
    regions = tuple(
        (Mask2D.from_container(read_tensor(r["mask"])), bool(r["has_counterpart"]))
        for r in case.regions
    )
    return CorrespondenceCase(
        name=case.name,
        image_features=feat,
        part_mask=part,
        object_mask=obj,
        vertex_features=vfield,
        click=case.click,
        gt_part=case.gt_part,
        seg2d=provider,
        regions=regions,
    )


Cases = Union[DatasetManifest, Sequence[CorrespondenceCase]]


def _materialize(cases: Cases) -> List[CorrespondenceCase]:
    if isinstance(cases, DatasetManifest):
        return [load_case(c) for c in cases.cases]
    return list(cases)


def _evaluate_one(
    case: CorrespondenceCase, method: str, k: int, seed: Optional[int], index: int
) -> CaseOutcome:
    gt = set(case.gt_part)
    try:
        ctx = case.context(k)
        if method == "bsb":
            result = bsb_match(ctx, case.seg2d)
            if result.vertex is None:
                return CaseOutcome(case.name, "no_match")
            outcome = "hit" if result.vertex in gt else "miss"
            return CaseOutcome(case.name, outcome, result.vertex, result.iou)
        if method == "nn":
            v = nn_baseline(ctx)
        elif method == "random":
            if seed is None:
                raise EvalError("random method needs a seed")
            v = random_candidate_baseline(ctx, seed + index)
        else:
            raise EvalError(f"unknown method {method!r}")
        return CaseOutcome(case.name, "hit" if v in gt else "miss", v)
    except (MatchError, ProviderError, BsbError) as exc:
        logger.warning("case %s failed: %s", case.name, exc)
        return CaseOutcome(case.name, "error", diagnostic=str(exc))


def eval_success_rate(
    cases: Cases,
    method: str = "bsb",
    k: int = DEFAULT_K,
    seed: Optional[int] = None,
    threads: int = 1,
) -> EvalReport:
    """Fraction of clicks whose matched vertex lands in the ground-truth part.

    A no-match outcome counts as a miss (reported separately), and so do
    per-case errors.
    """
    if method not in METHODS:
        raise EvalError(f"method must be one of {METHODS}, got {method!r}")
    materialized = _materialize(cases)
    if not materialized:
        raise EvalError("empty manifest")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(
                pool.map(
                    lambda args: _evaluate_one(*args),
                    [(c, method, k, seed, i) for i, c in enumerate(materialized)],
                )
            )
    else:
        outcomes = [
            _evaluate_one(c, method, k, seed, i) for i, c in enumerate(materialized)
        ]
    return EvalReport(method, k, seed, tuple(outcomes))


def ablate_k(
    cases: Cases, ks: Sequence[int], seed: Optional[int] = None, threads: int = 1
) -> List[Dict]:
    """Success rate per candidate budget; ks must be sorted ascending."""
    if not ks:
        raise EvalError("ks must be non-empty")
    if list(ks) != sorted(ks):
        raise EvalError("ks must be sorted ascending")
    materialized = _materialize(cases)
    table = []
    for k in ks:
        report = eval_success_rate(materialized, "bsb", k, seed, threads)
        table.append(
            {
                "k": int(k),
                "success_rate": report.success_rate,
                "hits": report.hits,
                "cases": report.case_count,
                "no_match": report.no_match_count,
            }
        )
    return table


@dataclass(frozen=True)
class FidelityStats:
    matched_mean: Optional[float]
    unmatched_mean: Optional[float]
    matched_samples: int
    unmatched_samples: int

    def to_dict(self) -> Dict:
        return {
            "matched_mean_iou": self.matched_mean,
            "unmatched_mean_iou": self.unmatched_mean,
            "matched_samples": self.matched_samples,
            "unmatched_samples": self.unmatched_samples,
        }


def fidelity_iou_stats(
    cases: Cases, samples_per_region: int, seed: int, k: int = DEFAULT_K
) -> FidelityStats:
    """Mean achieved overlap for clicks sampled inside annotated regions,
    split by whether the region has a 3D counterpart. No-match scores 0."""
    materialized = _materialize(cases)
    if not materialized:
        raise EvalError("empty manifest")
    rng = np.random.default_rng(seed)
    matched: List[float] = []
    unmatched: List[float] = []
    for case in materialized:
        for mask, has_counterpart in case.regions:
            ys, xs = np.nonzero(mask.bits)
            if ys.size == 0:
                raise EvalError(f"case {case.name}: region with zero area")
            count = min(samples_per_region, ys.size)
            chosen = rng.choice(ys.size, size=count, replace=False)
            bucket = matched if has_counterpart else unmatched
            for idx in chosen:
                x, y = int(xs[idx]), int(ys[idx])
                try:
                    obj, part = case.seg2d.query(x, y)
                    ctx = ClickContext(
                        case.image_features, (x, y), part, obj, case.vertex_features, k
                    )
                    result = bsb_match(ctx, case.seg2d)
                    bucket.append(result.iou if result.iou is not None else 0.0)
                except (MatchError, ProviderError) as exc:
                    logger.warning("fidelity sample (%d, %d) failed: %s", x, y, exc)
                    bucket.append(0.0)
    return FidelityStats(
        matched_mean=float(np.mean(matched)) if matched else None,
        unmatched_mean=float(np.mean(unmatched)) if unmatched else None,
        matched_samples=len(matched),
        unmatched_samples=len(unmatched),
    )


def build_projected_click_case(
    mesh: Mesh,
    labels3d: LabelField3D,
    camera: Camera,
    feature_image: FeatureImage,
    seg2d: Seg2DProvider,
    vertex_features: VertexFeatureField,
    vertex: int,
    name: str = "projected",
) -> CorrespondenceCase:
    """Turn a ground-truth vertex into a click by projecting it into a view.

    The vertex must be visible from the camera; the click is its rounded
    projection and the ground-truth part is every vertex sharing its label.
    """
    if not (0 <= vertex < mesh.vertex_count):
        raise EvalError(f"vertex {vertex} out of range")
    rmap = render(mesh, camera)
    if not rmap.visible[vertex]:
        raise EvalError(f"vertex {vertex} not visible from this view")
    x, y, _ = project_vertex(camera, mesh.vertices[vertex])
    px, py = int(round(x)), int(round(y))
    if not (0 <= px < camera.width and 0 <= py < camera.height):
        raise EvalError(f"vertex {vertex} projects outside the image")
    obj, part = seg2d.query(px, py)
    gt = tuple(int(v) for v in np.nonzero(labels3d.labels == labels3d.labels[vertex])[0])
    return CorrespondenceCase(
        name=name,
        image_features=feature_image,
        part_mask=part,
        object_mask=obj,
        vertex_features=vertex_features,
        click=(px, py),
        gt_part=gt,
        seg2d=seg2d,
    )


def generate_projected_cases(
    mesh: Mesh,
    labels3d: LabelField3D,
    views: Sequence[Tuple[Camera, FeatureImage]],
    seg2d: Seg2DProvider,
    vertex_features: VertexFeatureField,
    vertices_per_shape: int = 10,
    views_per_vertex: int = 2,
    seed: int = 0,
    name_prefix: str = "case",
) -> List[CorrespondenceCase]:
    """Sample vertices, keep those visible somewhere, and emit one case per
    (vertex, selected view). Invisible vertices are discarded."""
    rng = np.random.default_rng(seed)
    n = mesh.vertex_count
    chosen = rng.choice(n, size=min(vertices_per_shape, n), replace=False)
    render_maps = [render(mesh, cam) for cam, _ in views]
    cases: List[CorrespondenceCase] = []
    for v in sorted(int(u) for u in chosen):
        visible_views = [i for i, rm in enumerate(render_maps) if rm.visible[v]]
        if not visible_views:
            continue
        picks = rng.choice(
            len(visible_views), size=min(views_per_vertex, len(visible_views)), replace=False
        )
        for j in sorted(int(p) for p in picks):
            cam, feat = views[visible_views[j]]
            try:
                cases.append(
                    build_projected_click_case(
                        mesh,
                        labels3d,
                        cam,
                        feat,
                        seg2d,
                        vertex_features,
                        v,
                        name=f"{name_prefix}_v{v}_view{visible_views[j]}",
                    )
                )
            except (EvalError, ProviderError) as exc:
                logger.warning("projected case for vertex %d dropped: %s", v, exc)
    return cases
