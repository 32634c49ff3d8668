"""Interop acceptance: the committed bundle loads through the engine's
container reader and drives an end-to-end correspondence without error."""

import json
from pathlib import Path

from bsb_extract.extract import extract_image_features

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "golden"


def _report(name, ok, detail=""):
    suffix = f" ({detail})" if detail else ""
    print(f"[{'PASS' if ok else 'FAIL'}] {name}{suffix}")
    assert ok, name


def load_bundle():
    return json.loads((GOLDEN / "bundle.json").read_text())


def test_committed_containers_load_through_engine_reader():
    from bsb.tensor_io import FeatureImage, Mask2D, VertexFeatureField, read_tensor

    bundle = load_bundle()
    feat = FeatureImage.from_container(read_tensor(GOLDEN / bundle["image_features"]))
    side = json.loads((GOLDEN / "image_features.json").read_text())
    assert (feat.width, feat.height) == tuple(side["size"])
    assert feat.dim == bundle["channels"]
    vfield = VertexFeatureField.from_container(read_tensor(GOLDEN / bundle["vertex_features"]))
    assert vfield.dim == feat.dim
    seg_doc = json.loads((GOLDEN / bundle["seg2d"]).read_text())
    for entry in seg_doc["entries"]:
        obj = Mask2D.from_container(read_tensor(GOLDEN / "masks" / entry["object_mask"]))
        part = Mask2D.from_container(read_tensor(GOLDEN / "masks" / entry["part_mask"]))
        assert part.is_subset_of(obj)
        assert part.contains(*entry["pixel"])
    _report("committed bundle loads through the engine reader", True)


def test_extractor_rerun_matches_committed_features(tmp_path):
    bundle = load_bundle()
    tensor, _ = extract_image_features(
        DATA / "image.png", tmp_path, "hashpatch", bundle["channels"], stem="re"
    )
    identical = tensor.read_bytes() == (GOLDEN / bundle["image_features"]).read_bytes()
    _report("hashpatch re-run is byte-identical to the committed features", identical)


def test_end_to_end_correspond_on_real_image():
    from bsb.matcher import ClickContext
    from bsb.mesh import load_mesh
    from bsb.segmenters import correspond, file_backed_seg2d, floodfill_seg3d
    from bsb.tensor_io import FeatureImage, VertexFeatureField, read_tensor

    bundle = load_bundle()
    feat = FeatureImage.from_container(read_tensor(GOLDEN / bundle["image_features"]))
    vfield = VertexFeatureField.from_container(read_tensor(GOLDEN / bundle["vertex_features"]))
    mesh = load_mesh(DATA / "house.obj")
    seg2d = file_backed_seg2d(GOLDEN / bundle["seg2d"], mode="nearest")
    seg3d = floodfill_seg3d(vfield, mesh, tau=0.5)

    x, y = bundle["click"]
    obj, part = seg2d.query(x, y)
    ctx = ClickContext(feat, (x, y), part, obj, vfield, k=mesh.vertex_count)
    result, mask3d = correspond(ctx, seg2d, seg3d)

    # semantic quality is not asserted; the pipeline must simply run and
    # keep its structural invariants
    assert mask3d.count == mesh.vertex_count
    if result.vertex is not None:
        assert part.contains(*result.pixel)
        assert mask3d.contains(result.vertex)
        detail = f"matched vertex {result.vertex}, iou {result.iou:.2f}"
    else:
        assert mask3d.area() == 0
        detail = "explicit no-match"
    _report("end-to-end correspond on the committed 224x224 bundle", True, detail)
