"""Independent brute-force reference implementations used to check the engine.

Nothing here shares code with the library's matching, rasterization, or IoU
paths: candidate ranking is a plain python sort, pixel scans are explicit
loops in row-major order, visibility is segment/triangle intersection, and
IoU uses inclusion-exclusion counting.
"""

import math
from typing import List, Tuple

import numpy as np


def oracle_cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    s = float(np.dot(a, b)) / (na * nb)
    return max(-1.0, min(1.0, s))


def oracle_topk(image_features, click, vertex_features, valid, k) -> List[int]:
    """Full sort of eligible vertices by (similarity desc, index asc)."""
    x, y = click
    f = image_features[y, x]
    scored = []
    for v in range(vertex_features.shape[0]):
        if not valid[v]:
            continue
        if float(np.dot(vertex_features[v].astype(np.float64), vertex_features[v].astype(np.float64))) == 0.0:
            continue
        scored.append((v, oracle_cosine(f, vertex_features[v])))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return [v for v, _ in scored[:k]]


def oracle_nearest_pixel(vertex_feature, image_features, object_bits) -> Tuple[int, int]:
    """Explicit row-major scan for the most similar in-mask pixel."""
    h, w = object_bits.shape
    vf = np.asarray(vertex_feature, dtype=np.float64)
    vn = math.sqrt(float(np.dot(vf, vf)))
    best = None
    best_s = None
    for yy in range(h):
        for xx in range(w):
            if object_bits[yy, xx] != 1:
                continue
            pf = image_features[yy, xx].astype(np.float64)
            pn = math.sqrt(float(np.dot(pf, pf)))
            if pn == 0:
                continue
            s = float(np.dot(vf, pf)) / (vn * pn)
            s = max(-1.0, min(1.0, s))
            if best_s is None or s > best_s:
                best_s = s
                best = (xx, yy)
    return best


def oracle_iou(a_bits, b_bits) -> float:
    """Inclusion-exclusion pixel counting."""
    a = np.asarray(a_bits).astype(np.int64)
    b = np.asarray(b_bits).astype(np.int64)
    inter = int((a * b).sum())
    union = int(a.sum()) + int(b.sum()) - inter
    return 0.0 if union == 0 else inter / union


def oracle_bsb(
    image_features,
    click,
    part_bits,
    object_bits,
    vertex_features,
    valid,
    k,
    seg2d,
):
    """Exhaustive rerun of the matching pipeline with plain loops.

    Returns (vertex, pixel, iou) or (None, None, None).
    """
    candidates = oracle_topk(image_features, click, vertex_features, valid, k)
    best = None  # (vertex, pixel, iou)
    for v in candidates:
        q = oracle_nearest_pixel(vertex_features[v], image_features, object_bits)
        if q is None:
            continue
        qx, qy = q
        if part_bits[qy, qx] != 1:
            continue
        try:
            _, part_mask = seg2d.query(qx, qy)
        except Exception:
            continue
        iou = oracle_iou(part_bits, part_mask.bits)
        if best is None or iou > best[2]:
            best = (v, q, iou)
    if best is None:
        return None, None, None
    return best


def oracle_reverse(
    image_features,
    vertex_features,
    valid,
    vertex,
    mask3d_bits,
    seg3d,
    k,
):
    """Mirror of oracle_bsb with pixels and vertices swapped."""
    h, w, _ = image_features.shape
    vf = vertex_features[vertex].astype(np.float64)
    scored = []
    for yy in range(h):
        for xx in range(w):
            pf = image_features[yy, xx].astype(np.float64)
            if float(np.dot(pf, pf)) == 0.0:
                continue
            scored.append(((xx, yy), oracle_cosine(vf, pf)))
    scored.sort(key=lambda t: (-t[1], t[0][1], t[0][0]))
    candidates = [p for p, _ in scored[:k]]

    best = None
    for (qx, qy) in candidates:
        pf = image_features[qy, qx]
        nearest_v = None
        nearest_s = None
        for u in range(vertex_features.shape[0]):
            if not valid[u]:
                continue
            uf = vertex_features[u].astype(np.float64)
            if float(np.dot(uf, uf)) == 0.0:
                continue
            s = oracle_cosine(pf, uf)
            if nearest_s is None or s > nearest_s:
                nearest_s = s
                nearest_v = u
        if nearest_v is None or mask3d_bits[nearest_v] != 1:
            continue
        try:
            seg_mask = seg3d.query(nearest_v)
        except Exception:
            continue
        a = np.asarray(mask3d_bits).astype(np.int64)
        b = seg_mask.bits.astype(np.int64)
        inter = int((a * b).sum())
        union = int(a.sum()) + int(b.sum()) - inter
        iou = 0.0 if union == 0 else inter / union
        if best is None or iou > best[2]:
            best = ((qx, qy), nearest_v, iou)
    if best is None:
        return None, None, None
    return best


def raycast_visible(vertices, faces, eye, eps_z) -> np.ndarray:
    """A vertex is visible when no triangle blocks the eye->vertex segment
    by more than eps_z of depth (Moller-Trumbore, batched over triangles)."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces)
    eye = np.asarray(eye, dtype=np.float64)
    n = vertices.shape[0]
    visible = np.zeros(n, dtype=bool)
    if faces.size == 0:
        return np.ones(n, dtype=bool)
    v0 = vertices[faces[:, 0]]
    e1 = vertices[faces[:, 1]] - v0
    e2 = vertices[faces[:, 2]] - v0
    for v in range(n):
        direction = vertices[v] - eye
        dist = float(np.linalg.norm(direction))
        if dist == 0:
            visible[v] = True
            continue
        pvec = np.cross(direction, e2)
        det = np.einsum("ij,ij->i", e1, pvec)
        ok = np.abs(det) > 1e-12
        inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = eye - v0
        u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
        qvec = np.cross(tvec, e1)
        w = (direction * qvec).sum(axis=1) * inv_det
        t = np.einsum("ij,ij->i", e2, qvec) * inv_det
        # t is in units of the eye->vertex segment (t=1 at the vertex)
        hit = (
            ok
            & (u >= -1e-9)
            & (u <= 1 + 1e-9)
            & (w >= -1e-9)
            & (u + w <= 1 + 1e-9)
            & (t > 0)
            & (t * dist < dist - eps_z)
        )
        visible[v] = not bool(hit.any())
    return visible


def homogeneous_project(eye, target, up, fov_deg, width, height, point):
    """Classic 4x4 look-at + perspective pipeline, NDC mapped to pixels."""
    eye = np.asarray(eye, dtype=np.float64)
    f = target - eye
    f = f / np.linalg.norm(f)
    s = np.cross(f, up)
    s = s / np.linalg.norm(s)
    u = np.cross(s, f)
    view = np.eye(4)
    view[0, :3] = s
    view[1, :3] = u
    view[2, :3] = -f
    view[:3, 3] = -view[:3, :3] @ eye

    near, far = 0.01, 100.0
    t = math.tan(math.radians(fov_deg) / 2.0)
    aspect = width / height
    proj = np.zeros((4, 4))
    proj[0, 0] = 1.0 / (aspect * t)
    proj[1, 1] = 1.0 / t
    proj[2, 2] = -(far + near) / (far - near)
    proj[2, 3] = -2 * far * near / (far - near)
    proj[3, 2] = -1.0

    p = np.array([point[0], point[1], point[2], 1.0])
    clip = proj @ (view @ p)
    ndc = clip[:3] / clip[3]
    px = (ndc[0] + 1.0) / 2.0 * width
    py = (1.0 - ndc[1]) / 2.0 * height
    depth = -(view @ p)[2]
    return px, py, depth


def bfs_reachable(adjacency, seed, member) -> set:
    """Stack-based reachability over an adjacency structure."""
    seen = {seed}
    stack = [seed]
    while stack:
        v = stack.pop()
        for u in adjacency[v]:
            if u not in seen and member(u):
                seen.add(u)
                stack.append(u)
    return seen
