import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsb.errors import MatchError, ProviderError
from bsb.matcher import (
    ClickContext,
    bsb_match,
    bsb_match_reverse,
    cosine_similarity,
    mask_iou,
    nearest_pixel,
    nn_baseline,
    random_candidate_baseline,
    top_k_candidates,
)
from bsb.segmenters import Seg2DProvider
from bsb.synthetic import make_missing_part_instance, make_planted_instance
from bsb.tensor_io import FeatureImage, Mask2D, Mask3D, VertexFeatureField

from oracles import (
    oracle_bsb,
    oracle_cosine,
    oracle_iou,
    oracle_nearest_pixel,
    oracle_reverse,
    oracle_topk,
)


# ---------------------------------------------------------------- helpers


def random_context(seed, n=20, h=12, w=12, d=4, k=None, zero_valid_rows=0):
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(h, w, d)).astype(np.float32)
    vfeats = rng.normal(size=(n, d)).astype(np.float32)
    valid = np.ones(n, dtype=bool)
    invalid = rng.choice(n, size=min(zero_valid_rows, n - 1), replace=False)
    valid[invalid] = False
    vfeats[invalid] = 0.0
    part = np.zeros((h, w), dtype=np.uint8)
    part[h // 4 : 3 * h // 4, w // 4 : 3 * w // 4] = 1
    obj = np.zeros((h, w), dtype=np.uint8)
    obj[1:-1, 1:-1] = 1
    obj |= part
    click = (w // 2, h // 2)
    return ClickContext(
        FeatureImage(feats),
        click,
        Mask2D(part),
        Mask2D(obj),
        VertexFeatureField(vfeats, valid),
        k or n,
    )


# ---------------------------------------------------------------- cosine


def test_cosine_scale_invariance():
    v = np.array([3.0, -1.0, 2.0])
    assert cosine_similarity(v, 2 * v) == pytest.approx(1.0)


def test_cosine_orthogonal():
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_hand_computed_third():
    # (1,2,2).(2,0,0) = 2; norms 3 and 2 -> 2/6 = 1/3
    got = cosine_similarity(np.array([1.0, 2.0, 2.0]), np.array([2.0, 0.0, 0.0]))
    assert got == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_cosine_zero_norm_rejected():
    with pytest.raises(MatchError, match="zero-norm"):
        cosine_similarity(np.zeros(3), np.ones(3))


def test_cosine_dim_mismatch_rejected():
    with pytest.raises(MatchError, match="mismatch"):
        cosine_similarity(np.ones(3), np.ones(4))


@settings(max_examples=60, derandomize=True)
@given(seed=st.integers(0, 10_000))
def test_cosine_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=6)
    b = rng.normal(size=6)
    assert cosine_similarity(a, b) == pytest.approx(oracle_cosine(a, b), abs=1e-12)


# ---------------------------------------------------------------- top-k


def test_topk_with_k_at_least_n_returns_all_sorted():
    ctx = random_context(0, n=15, k=50)
    got = top_k_candidates(ctx)
    assert got == oracle_topk(
        ctx.image_features.data, ctx.click, ctx.vertex_features.data, ctx.vertex_features.valid, 50
    )
    assert len(got) == 15


def test_topk_planted_first():
    ctx = random_context(1, n=8, d=4, k=3)
    vfeats = ctx.vertex_features.data.copy()
    click_f = ctx.image_features.data[ctx.click[1], ctx.click[0]]
    vfeats[5] = 2.0 * click_f  # same direction, different scale
    field = VertexFeatureField(vfeats, ctx.vertex_features.valid)
    ctx = ClickContext(
        ctx.image_features, ctx.click, ctx.part_mask, ctx.object_mask, field, 3
    )
    assert top_k_candidates(ctx)[0] == 5


def test_topk_matches_full_sort_oracle_50_vertices():
    ctx = random_context(2, n=50, k=10)
    got = top_k_candidates(ctx)
    expected = oracle_topk(
        ctx.image_features.data, ctx.click, ctx.vertex_features.data, ctx.vertex_features.valid, 10
    )
    assert got == expected


def test_topk_ties_break_toward_lower_index():
    feats = np.zeros((2, 2, 2), dtype=np.float32)
    feats[..., 0] = 1.0
    vfeats = np.tile(np.array([[1.0, 0.0]], dtype=np.float32), (5, 1))
    full = Mask2D(np.ones((2, 2), dtype=np.uint8))
    ctx = ClickContext(
        FeatureImage(feats), (0, 0), full, full,
        VertexFeatureField(vfeats, np.ones(5, dtype=bool)), 5,
    )
    assert top_k_candidates(ctx) == [0, 1, 2, 3, 4]


def test_topk_all_invalid_rejected():
    with pytest.raises(MatchError, match="no valid vertex"):
        vf = VertexFeatureField(np.zeros((3, 2), dtype=np.float32), np.zeros(3, dtype=bool))
        full = Mask2D(np.ones((2, 2), dtype=np.uint8))
        feats = FeatureImage(np.ones((2, 2, 2), dtype=np.float32))
        top_k_candidates(ClickContext(feats, (0, 0), full, full, vf, 1))


def test_topk_zero_norm_click_rejected():
    feats = np.zeros((2, 2, 2), dtype=np.float32)
    feats[0, 1:] = 1.0
    full = Mask2D(np.ones((2, 2), dtype=np.uint8))
    vf = VertexFeatureField(np.ones((3, 2), dtype=np.float32), np.ones(3, dtype=bool))
    with pytest.raises(MatchError, match="zero-norm"):
        top_k_candidates(ClickContext(FeatureImage(feats), (0, 0), full, full, vf, 1))


# ---------------------------------------------------------------- nearest pixel


def test_nearest_pixel_single_pixel_mask():
    ctx = random_context(3)
    obj = np.zeros((12, 12), dtype=np.uint8)
    obj[6, 6] = 1
    part = obj.copy()
    ctx = ClickContext(
        ctx.image_features, (6, 6), Mask2D(part), Mask2D(obj), ctx.vertex_features, 4
    )
    assert nearest_pixel(0, ctx) == (6, 6)


def test_nearest_pixel_planted():
    feats = np.zeros((4, 4, 3), dtype=np.float32)
    feats[..., 2] = 1.0
    feats[2, 3] = [1.0, 0.0, 0.0]
    obj = np.ones((4, 4), dtype=np.uint8)
    vf = VertexFeatureField(
        np.array([[1.0, 0.0, 0.0]], dtype=np.float32), np.ones(1, dtype=bool)
    )
    ctx = ClickContext(FeatureImage(feats), (0, 0), Mask2D(obj), Mask2D(obj), vf, 1)
    assert nearest_pixel(0, ctx) == (3, 2)


def test_nearest_pixel_matches_scan_oracle_16x16():
    ctx = random_context(4, n=6, h=16, w=16, d=5)
    for v in range(6):
        got = nearest_pixel(v, ctx)
        expected = oracle_nearest_pixel(
            ctx.vertex_features.data[v], ctx.image_features.data, ctx.object_mask.bits
        )
        assert got == expected


def test_nearest_pixel_tie_breaks_row_major():
    feats = np.ones((3, 3, 2), dtype=np.float32)
    obj = np.zeros((3, 3), dtype=np.uint8)
    obj[1, 1] = obj[0, 2] = obj[2, 0] = 1
    part = np.zeros((3, 3), dtype=np.uint8)
    part[0, 2] = 1
    vf = VertexFeatureField(np.ones((2, 2), dtype=np.float32), np.ones(2, dtype=bool))
    ctx = ClickContext(FeatureImage(feats), (2, 0), Mask2D(part), Mask2D(obj), vf, 1)
    # all three pixels tie at similarity 1; (2, 0) is first in row-major order
    assert nearest_pixel(0, ctx) == (2, 0)


def test_nearest_pixel_empty_mask_rejected():
    ctx = random_context(5)
    empty = Mask2D(np.zeros((12, 12), dtype=np.uint8))
    with pytest.raises(MatchError, match="empty"):
        broken = ClickContext.__new__(ClickContext)
        object.__setattr__(broken, "image_features", ctx.image_features)
        object.__setattr__(broken, "click", ctx.click)
        object.__setattr__(broken, "part_mask", ctx.part_mask)
        object.__setattr__(broken, "object_mask", empty)
        object.__setattr__(broken, "vertex_features", ctx.vertex_features)
        object.__setattr__(broken, "k", 1)
        nearest_pixel(0, broken)


# ---------------------------------------------------------------- IoU


def test_iou_identical_masks():
    m = Mask2D(np.eye(4, dtype=np.uint8))
    assert mask_iou(m, m) == 1.0


def test_iou_disjoint_masks():
    a = np.zeros((4, 4), dtype=np.uint8)
    b = np.zeros((4, 4), dtype=np.uint8)
    a[0] = 1
    b[3] = 1
    assert mask_iou(Mask2D(a), Mask2D(b)) == 0.0


def test_iou_hand_counted_third():
    a = np.zeros((4, 4), dtype=np.uint8)
    b = np.zeros((4, 4), dtype=np.uint8)
    a[[0, 1]] = 1  # rows 0-1
    b[[1, 2]] = 1  # rows 1-2
    assert mask_iou(Mask2D(a), Mask2D(b)) == pytest.approx(4 / 12)


def test_iou_empty_union_is_zero():
    z = Mask2D(np.zeros((3, 3), dtype=np.uint8))
    assert mask_iou(z, z) == 0.0


def test_iou_dim_mismatch_rejected():
    with pytest.raises(MatchError):
        mask_iou(
            Mask2D(np.zeros((2, 2), dtype=np.uint8)),
            Mask2D(np.zeros((3, 3), dtype=np.uint8)),
        )


def test_iou_matches_counting_oracle():
    rng = np.random.default_rng(8)
    for _ in range(200):
        a = (rng.random((9, 9)) < 0.4).astype(np.uint8)
        b = (rng.random((9, 9)) < 0.4).astype(np.uint8)
        assert mask_iou(Mask2D(a), Mask2D(b)) == oracle_iou(a, b)


# ---------------------------------------------------------------- bsb_match


def test_planted_instance_matches_part_with_full_iou():
    inst = make_planted_instance(seed=11, noise=0.0)
    res = bsb_match(inst.click_context(k=inst.mesh.vertex_count), inst.seg2d())
    assert res.vertex in inst.gt_part
    assert res.iou == 1.0
    assert inst.part_mask.contains(*res.pixel)


def test_missing_part_returns_none():
    inst = make_missing_part_instance(seed=12, noise=0.02)
    res = bsb_match(inst.click_context(k=inst.mesh.vertex_count), inst.seg2d())
    assert res.vertex is None and res.pixel is None and res.iou is None
    # every candidate must have been filtered at the part-mask gate
    for cand in res.candidates:
        assert not cand.in_part


def test_bsb_match_equals_oracle_on_30_vertex_instance():
    inst = make_planted_instance(seed=13, verts_per_part=10, parts=3, noise=0.03)
    ctx = inst.click_context(k=inst.mesh.vertex_count)
    seg = inst.seg2d()
    res = bsb_match(ctx, seg)
    ov, op, oi = oracle_bsb(
        ctx.image_features.data,
        ctx.click,
        ctx.part_mask.bits,
        ctx.object_mask.bits,
        ctx.vertex_features.data,
        ctx.vertex_features.valid,
        ctx.k,
        seg,
    )
    assert (res.vertex, res.pixel, res.iou) == (ov, op, oi)


class FailingSeg2D(Seg2DProvider):
    def query(self, x, y):
        raise ProviderError("backend unavailable")


def test_provider_failure_discards_candidate_with_diagnostic():
    inst = make_planted_instance(seed=14, noise=0.0)
    res = bsb_match(inst.click_context(k=4), FailingSeg2D())
    assert res.vertex is None
    notes = [c.note for c in res.candidates if c.note]
    assert any("provider failed" in n for n in notes)


def test_back_projection_guarantee_fuzz():
    for seed in range(25):
        ctx = random_context(100 + seed, n=24, h=10, w=10, d=3, zero_valid_rows=3)
        inst = make_planted_instance(seed=seed, noise=0.05)
        res = bsb_match(inst.click_context(k=7), inst.seg2d())
        if res.vertex is not None:
            assert inst.part_mask.contains(*res.pixel)
        else:
            for cand in res.candidates:
                if cand.pixel is not None:
                    assert not inst.part_mask.contains(*cand.pixel)


def test_candidate_monotonicity_in_k():
    inst = make_planted_instance(seed=15, decoys=3, noise=0.02)
    seg = inst.seg2d()
    previous = -1.0
    for k in range(1, inst.mesh.vertex_count + 1):
        res = bsb_match(inst.click_context(k=k), seg)
        iou = res.iou if res.iou is not None else -1.0
        assert iou >= previous
        previous = iou


def test_single_vector_scaling_changes_nothing():
    # scaling one vertex row and one pixel by powers of two is exact in
    # floating point, so the whole result must be bit-for-bit unchanged
    inst = make_planted_instance(seed=27, decoys=1, noise=0.02)
    ctx = inst.click_context(k=inst.mesh.vertex_count)
    seg = inst.seg2d()
    base = bsb_match(ctx, seg)
    vdata = ctx.vertex_features.data.copy()
    vdata[3] *= np.float32(8.0)
    idata = ctx.image_features.data.copy()
    idata[2, 2] *= np.float32(0.25)
    ctx2 = ClickContext(
        FeatureImage(idata), ctx.click, ctx.part_mask, ctx.object_mask,
        VertexFeatureField(vdata, ctx.vertex_features.valid), ctx.k,
    )
    scaled = bsb_match(ctx2, seg)
    assert (base.vertex, base.pixel, base.iou) == (scaled.vertex, scaled.pixel, scaled.iou)
    assert [c.vertex for c in base.candidates] == [c.vertex for c in scaled.candidates]
    assert [c.pixel for c in base.candidates] == [c.pixel for c in scaled.candidates]


def test_scale_invariance_with_exact_powers_of_two():
    inst = make_planted_instance(seed=16, decoys=2, noise=0.02)
    ctx = inst.click_context(k=inst.mesh.vertex_count)
    seg = inst.seg2d()
    base = bsb_match(ctx, seg)
    scaled_field = VertexFeatureField(
        (ctx.vertex_features.data * np.float32(4.0)), ctx.vertex_features.valid
    )
    scaled_img = FeatureImage(ctx.image_features.data * np.float32(0.25))
    ctx2 = ClickContext(
        scaled_img, ctx.click, ctx.part_mask, ctx.object_mask, scaled_field, ctx.k
    )
    scaled = bsb_match(ctx2, seg)
    assert (base.vertex, base.pixel, base.iou) == (scaled.vertex, scaled.pixel, scaled.iou)
    assert [c.vertex for c in base.candidates] == [c.vertex for c in scaled.candidates]


# ---------------------------------------------------------------- baselines


def test_nn_baseline_is_top1():
    for seed in range(10):
        ctx = random_context(200 + seed, n=30, k=5)
        assert nn_baseline(ctx) == top_k_candidates(ctx)[0]


def test_nn_baseline_on_planted_instance():
    inst = make_planted_instance(seed=17, noise=0.0)
    assert nn_baseline(inst.click_context()) in inst.gt_part


def test_decoy_fools_nn_but_not_bsb():
    inst = make_planted_instance(seed=18, decoys=2, noise=0.02)
    ctx = inst.click_context(k=inst.mesh.vertex_count)
    nn = nn_baseline(ctx)
    assert nn in inst.decoys
    assert nn not in inst.gt_part
    res = bsb_match(ctx, inst.seg2d())
    assert res.vertex in inst.gt_part
    # the adversarial fixture itself is validated against the oracle
    ov, op, oi = oracle_bsb(
        ctx.image_features.data,
        ctx.click,
        ctx.part_mask.bits,
        ctx.object_mask.bits,
        ctx.vertex_features.data,
        ctx.vertex_features.valid,
        ctx.k,
        inst.seg2d(),
    )
    assert (res.vertex, res.pixel, res.iou) == (ov, op, oi)


def test_random_baseline_singleton_and_determinism():
    inst = make_planted_instance(seed=19)
    ctx = inst.click_context(k=1)
    only = top_k_candidates(ctx)[0]
    assert random_candidate_baseline(ctx, seed=0) == only
    ctx5 = inst.click_context(k=5)
    assert random_candidate_baseline(ctx5, seed=42) == random_candidate_baseline(ctx5, seed=42)


def test_random_baseline_uniform_chi2():
    from scipy.stats import chisquare

    inst = make_planted_instance(seed=20)
    ctx = inst.click_context(k=6)
    candidates = top_k_candidates(ctx)
    counts = {v: 0 for v in candidates}
    for s in range(10_000, 20_000):
        counts[random_candidate_baseline(ctx, seed=s)] += 1
    _, p = chisquare(list(counts.values()))
    assert p > 0.01


# ---------------------------------------------------------------- reverse


def test_reverse_planted_symmetric_instance():
    inst = make_planted_instance(seed=21, noise=0.0)
    v = inst.gt_part[0]
    mask3d = inst.gt_mask3d()
    res = bsb_match_reverse(
        inst.image_features, inst.vertex_features, v, mask3d, inst.seg3d(), k=10
    )
    assert res.pixel is not None
    x, y = res.pixel
    assert inst.labels2d.labels[y, x] == inst.click_part
    assert res.iou == 1.0


def test_reverse_matches_oracle():
    inst = make_planted_instance(seed=22, noise=0.05, width=10, height=10, verts_per_part=4)
    v = inst.gt_part[1]
    mask3d = inst.gt_mask3d()
    seg3d = inst.seg3d()
    res = bsb_match_reverse(
        inst.image_features, inst.vertex_features, v, mask3d, seg3d, k=12
    )
    op, ov, oi = oracle_reverse(
        inst.image_features.data,
        inst.vertex_features.data,
        inst.vertex_features.valid,
        v,
        mask3d.bits,
        seg3d,
        12,
    )
    assert (res.pixel, res.vertex, res.iou) == (op, ov, oi)


def test_reverse_no_pixel_maps_into_mask():
    # clicked vertex's part has no 2D presence: its pixels' nearest vertices
    # all live in other parts, so nothing survives
    inst = make_planted_instance(seed=23, noise=0.0, parts=3)
    lonely = inst.mesh.vertex_count - 1  # vertex of part 3
    bits = np.zeros(inst.mesh.vertex_count, dtype=np.uint8)
    bits[lonely] = 1
    # strip part-3 pixels out of the image so no pixel points at it
    feats = inst.image_features.data.copy()
    feats[inst.labels2d.labels == 3] = feats[inst.labels2d.labels == 1][0]
    res = bsb_match_reverse(
        FeatureImage(feats), inst.vertex_features, lonely, Mask3D(bits), inst.seg3d(), k=5
    )
    assert res.pixel is None and res.vertex is None


def test_reverse_single_pixel_image():
    feats = np.ones((1, 1, 2), dtype=np.float32)
    vf = VertexFeatureField(
        np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32), np.ones(2, dtype=bool)
    )
    mask = Mask3D(np.array([1, 0], dtype=np.uint8))

    class IdentitySeg3D:
        def query(self, v):
            bits = np.zeros(2, dtype=np.uint8)
            bits[v] = 1
            return Mask3D(bits)

    res = bsb_match_reverse(FeatureImage(feats), vf, 0, mask, IdentitySeg3D(), k=3)
    # the single pixel's nearest vertex is 0 (tie at cos 45 deg -> lower index),
    # which is inside the mask
    assert res.pixel == (0, 0)
    other = Mask3D(np.array([0, 1], dtype=np.uint8))
    res2 = bsb_match_reverse(FeatureImage(feats), vf, 1, other, IdentitySeg3D(), k=3)
    assert res2.pixel is None


# ---------------------------------------------------------------- context validation


def test_context_requires_click_inside_part():
    inst = make_planted_instance(seed=24)
    outside = (0, 0) if not inst.part_mask.contains(0, 0) else (inst.part_mask.width - 1, 0)
    with pytest.raises(MatchError, match="part mask"):
        ClickContext(
            inst.image_features, outside, inst.part_mask, inst.object_mask,
            inst.vertex_features, 5,
        )


def test_context_requires_part_inside_object():
    inst = make_planted_instance(seed=25)
    small_obj = Mask2D((inst.labels2d.labels == inst.click_part).astype(np.uint8) * 0)
    with pytest.raises(MatchError):
        ClickContext(
            inst.image_features, inst.click, inst.part_mask, small_obj,
            inst.vertex_features, 5,
        )


def test_context_rejects_bad_k():
    inst = make_planted_instance(seed=26)
    with pytest.raises(MatchError, match="k must be"):
        inst.click_context(k=0)
