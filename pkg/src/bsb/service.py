"""HTTP session service for the interactive correspondence loop.

Sessions are immutable in-memory bundles (features, mesh, providers) behind
opaque ids with LRU eviction. Inference endpoints are read-only and
deterministic: identical requests yield byte-identical JSON.
"""

import json
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import Response

from .errors import BsbError, MatchError, ProviderError
from .matcher import ClickContext, bsb_match_reverse
from .mesh import Mesh, load_mesh
from .segmenters import (
    Seg2DProvider,
    Seg3DProvider,
    correspond,
    parse_seg2d_spec,
    parse_seg3d_spec,
)
from .tensor_io import FeatureImage, VertexFeatureField, read_tensor

DEFAULT_SESSION_CAP = 16

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".ppm": "image/x-portable-pixmap",
    ".pgm": "image/x-portable-graymap",
}


def rle_encode(bits: np.ndarray) -> List[List[int]]:
    """Run-length pairs [start, length] over the row-major flattening."""
    flat = np.asarray(bits, dtype=np.uint8).reshape(-1)
    padded = np.concatenate([[0], flat, [0]])
    edges = np.flatnonzero(np.diff(padded))
    starts = edges[0::2]
    ends = edges[1::2]
    return [[int(s), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(pairs: List[List[int]], size: int) -> np.ndarray:
    flat = np.zeros(size, dtype=np.uint8)
    for start, length in pairs:
        if start < 0 or length < 0 or start + length > size:
            raise ValueError(f"run [{start}, {length}] exceeds size {size}")
        flat[start : start + length] = 1
    return flat


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass(frozen=True)
class Session:
    id: str
    created_at: float
    image_features: FeatureImage
    vertex_features: VertexFeatureField
    mesh: Mesh
    seg2d: Seg2DProvider
    seg3d: Seg3DProvider
    default_k: int
    display_image: Optional[Path] = None


class SessionRegistry:
    """Id-keyed store with least-recently-used eviction."""

    def __init__(self, cap: int = DEFAULT_SESSION_CAP):
        self.cap = cap
        self._sessions: "OrderedDict[str, Session]" = OrderedDict()
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            if self.cap < 1:
                raise ApiError(503, "session capacity is zero")
            while len(self._sessions) >= self.cap:
                evicted, _ = self._sessions.popitem(last=False)
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise ApiError(404, f"unknown session {session_id}")
            self._sessions.move_to_end(session_id)
            return session

    def remove(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise ApiError(404, f"unknown session {session_id}")
            del self._sessions[session_id]

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def _load_bundle(manifest: Dict, base_dir: Path) -> Session:
    for key in ("image_features", "vertex_features", "mesh", "seg2d"):
        if key not in manifest:
            raise ApiError(400, f"bundle manifest missing {key!r}")

    def resolve(value: str) -> Path:
        p = Path(value)
        p = p if p.is_absolute() else base_dir / p
        if not p.is_file():
            raise ApiError(400, f"referenced path does not resolve: {p}")
        return p

    try:
        feat = FeatureImage.from_container(read_tensor(resolve(manifest["image_features"])))
        vfield = VertexFeatureField.from_container(read_tensor(resolve(manifest["vertex_features"])))
        mesh = load_mesh(resolve(manifest["mesh"]))
        seg2d = parse_seg2d_spec(manifest["seg2d"], base_dir=base_dir)
        seg3d = parse_seg3d_spec(
            manifest.get("seg3d", "floodfill"), base_dir=base_dir, mesh=mesh, field=vfield
        )
    except BsbError as exc:
        raise ApiError(400, str(exc)) from exc
    if vfield.count != mesh.vertex_count:
        raise ApiError(
            400,
            f"vertex features ({vfield.count}) do not match mesh ({mesh.vertex_count})",
        )
    if feat.dim != vfield.dim:
        raise ApiError(400, f"feature dims differ: image {feat.dim}, vertices {vfield.dim}")
    display = None
    if manifest.get("image"):
        display = resolve(manifest["image"])
    k = int(manifest.get("k", 100))
    if k < 1:
        raise ApiError(400, f"k must be >= 1, got {k}")
    return Session(
        id=uuid.uuid4().hex,
        created_at=time.time(),
        image_features=feat,
        vertex_features=vfield,
        mesh=mesh,
        seg2d=seg2d,
        seg3d=seg3d,
        default_k=k,
        display_image=display,
    )


def _json_response(payload: Dict, status: int = 200) -> Response:
    body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return Response(content=body, status_code=status, media_type="application/json")


def _candidate_payload(reports) -> List[Dict]:
    out = []
    for c in reports:
        entry = {
            "similarity": float(c.similarity),
            "iou": None if c.iou is None else float(c.iou),
            "note": c.note,
        }
        if hasattr(c, "in_part"):
            entry["vertex"] = c.vertex
            entry["pixel"] = None if c.pixel is None else [c.pixel[0], c.pixel[1]]
            entry["in_part"] = c.in_part
        else:
            entry["pixel"] = [c.pixel[0], c.pixel[1]]
            entry["vertex"] = c.vertex
            entry["in_mask"] = c.in_mask
        out.append(entry)
    return out


def create_app(session_cap: int = DEFAULT_SESSION_CAP) -> FastAPI:
    app = FastAPI(title="bsb correspondence service")
    registry = SessionRegistry(session_cap)
    app.state.registry = registry

    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return _json_response({"error": {"code": exc.status, "message": exc.message}}, exc.status)

    @app.exception_handler(RequestValidationError)
    async def _bad_body(_request: Request, exc: RequestValidationError):
        return _json_response({"error": {"code": 400, "message": f"invalid request body: {exc}"}}, 400)

    # handlers are synchronous on purpose: the framework runs them in its
    # threadpool, so one slow inference never stalls other sessions
    @app.post("/sessions")
    def create_session(body: dict = Body(...)):
        if "path" in body:
            manifest_path = Path(body["path"])
            if not manifest_path.is_file():
                raise ApiError(400, f"referenced path does not resolve: {manifest_path}")
            try:
                manifest = json.loads(manifest_path.read_text())
            except json.JSONDecodeError as exc:
                raise ApiError(400, f"bundle manifest is not valid JSON: {exc}")
            base_dir = manifest_path.parent
        else:
            manifest = body
            base_dir = Path(body.get("base_dir", "."))
        session = _load_bundle(manifest, base_dir)
        registry.add(session)
        return _json_response({"id": session.id})

    @app.post("/sessions/{session_id}/click")
    def click_pixel(session_id: str, body: dict = Body(...)):
        session = registry.get(session_id)
        try:
            x, y = int(body["x"]), int(body["y"])
        except (KeyError, TypeError, ValueError):
            raise ApiError(400, 'click body needs integer "x" and "y"')
        k = int(body.get("k", session.default_k))
        feat = session.image_features
        if not feat.in_bounds(x, y):
            raise ApiError(400, f"click ({x}, {y}) outside image {feat.width}x{feat.height}")
        try:
            object_mask, part_mask = session.seg2d.query(x, y)
        except ProviderError as exc:
            raise ApiError(400, f"segmentation failed at ({x}, {y}): {exc}")
        try:
            ctx = ClickContext(feat, (x, y), part_mask, object_mask, session.vertex_features, k)
            result, mask3d = correspond(ctx, session.seg2d, session.seg3d)
        except (MatchError, ProviderError) as exc:
            raise ApiError(400, str(exc))

        match_mask_rle = None
        if result.pixel is not None:
            try:
                _, match_part = session.seg2d.query(*result.pixel)
                match_mask_rle = rle_encode(match_part.bits)
            except ProviderError:
                match_mask_rle = None
        payload = {
            "vertex": result.vertex,
            "pixel": None if result.pixel is None else [result.pixel[0], result.pixel[1]],
            "iou": None if result.iou is None else float(result.iou),
            "mask2d_part": rle_encode(part_mask.bits),
            "mask2d_match": match_mask_rle,
            "mask3d": [int(v) for v in mask3d.indices()],
            "candidates": _candidate_payload(result.candidates),
            "k": k,
            "width": feat.width,
            "height": feat.height,
        }
        return _json_response(payload)

    @app.post("/sessions/{session_id}/vertex-click")
    def click_vertex(session_id: str, body: dict = Body(...)):
        session = registry.get(session_id)
        try:
            v = int(body["v"])
        except (KeyError, TypeError, ValueError):
            raise ApiError(400, 'vertex-click body needs an integer "v"')
        k = int(body.get("k", session.default_k))
        n = session.vertex_features.count
        if not (0 <= v < n):
            raise ApiError(400, f"vertex {v} out of range [0, {n})")
        try:
            mask3d = session.seg3d.query(v)
            result = bsb_match_reverse(
                session.image_features,
                session.vertex_features,
                v,
                mask3d,
                session.seg3d,
                k,
            )
        except (MatchError, ProviderError) as exc:
            raise ApiError(400, str(exc))
        mask2d_rle = None
        if result.pixel is not None:
            try:
                _, part = session.seg2d.query(*result.pixel)
                mask2d_rle = rle_encode(part.bits)
            except ProviderError:
                mask2d_rle = None
        payload = {
            "vertex": v,
            "pixel": None if result.pixel is None else [result.pixel[0], result.pixel[1]],
            "iou3d": None if result.iou is None else float(result.iou),
            "mask3d": [int(u) for u in mask3d.indices()],
            "mask2d": mask2d_rle,
            "candidates": _candidate_payload(result.candidates),
            "k": k,
            "width": session.image_features.width,
            "height": session.image_features.height,
        }
        return _json_response(payload)

    @app.get("/sessions/{session_id}/mesh")
    def get_mesh(session_id: str):
        session = registry.get(session_id)
        payload = {
            "vertices": [[float(c) for c in row] for row in session.mesh.vertices.tolist()],
            "faces": [[int(i) for i in row] for row in session.mesh.faces.tolist()],
        }
        return _json_response(payload)

    @app.get("/sessions/{session_id}/image")
    def get_image(session_id: str):
        session = registry.get(session_id)
        if session.display_image is None:
            raise ApiError(404, "session has no display image")
        suffix = session.display_image.suffix.lower()
        media = _MEDIA_TYPES.get(suffix, "application/octet-stream")
        return Response(content=session.display_image.read_bytes(), media_type=media)

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        registry.remove(session_id)
        return _json_response({"deleted": session_id})

    return app


def serve(host: str = "127.0.0.1", port: int = 8008, session_cap: int = DEFAULT_SESSION_CAP):
    import uvicorn

    uvicorn.run(create_app(session_cap), host=host, port=port)
