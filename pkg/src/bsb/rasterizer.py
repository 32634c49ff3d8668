"""Deterministic software rasterization with per-pixel vertex attribution.

Cameras orbit the origin. Pixel sample points sit on the integer lattice:
pixel (ix, iy) is tested at continuous coordinates (ix, iy), so rounding a
projected position yields the pixel whose sample is nearest.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import BehindCameraError, RenderError
from .mesh import Mesh

DEFAULT_RADIUS = 2.0
DEFAULT_FOV = 60.0
DEFAULT_SIZE = 224

# elevations x azimuths used for multi-view distillation
GRID_ELEVATIONS = (-60.0, -30.0, 0.0, 30.0, 60.0)
GRID_AZIMUTHS = tuple(float(a) for a in range(0, 360, 30))

_POLE_LIMIT = 89.0
_NEAR = 1e-6


@dataclass(frozen=True)
class Camera:
    elevation: float  # degrees above the horizontal plane
    azimuth: float  # degrees around +Y
    radius: float = DEFAULT_RADIUS
    fov: float = DEFAULT_FOV  # vertical field of view, degrees
    width: int = DEFAULT_SIZE
    height: int = DEFAULT_SIZE

    def __post_init__(self):
        if self.radius <= 0:
            raise RenderError(f"radius must be positive, got {self.radius}")
        if not (0 < self.fov < 180):
            raise RenderError(f"fov must be in (0, 180), got {self.fov}")
        if self.width < 1 or self.height < 1:
            raise RenderError("image size must be at least 1x1")

    def basis(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return (eye, right, up, forward) in world space, float64."""
        el = math.radians(self.elevation)
        az = math.radians(self.azimuth)
        eye = self.radius * np.array(
            [math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)]
        )
        forward = -eye / np.linalg.norm(eye)
        # +Y up, with +X substituted near the poles to dodge the look-at singularity
        world_up = np.array([0.0, 1.0, 0.0]) if abs(self.elevation) < _POLE_LIMIT else np.array([1.0, 0.0, 0.0])
        right = np.cross(forward, world_up)
        right = right / np.linalg.norm(right)
        up = np.cross(right, forward)
        return eye, right, up, forward

    @property
    def focal(self) -> float:
        return (self.height / 2.0) / math.tan(math.radians(self.fov) / 2.0)


def _camera_coords(camera: Camera, points: np.ndarray) -> np.ndarray:
    """World points (k, 3) -> camera coordinates (k, 3): x right, y up, z depth."""
    eye, right, up, forward = camera.basis()
    d = np.asarray(points, dtype=np.float64) - eye
    return np.stack([d @ right, d @ up, d @ forward], axis=-1)


def _pixels_from_cam(camera: Camera, cam: np.ndarray) -> np.ndarray:
    """Camera coordinates (k, 3) -> (x_pix, y_pix, depth), y growing downward."""
    z = cam[:, 2]
    f = camera.focal
    x = camera.width / 2.0 + f * cam[:, 0] / z
    y = camera.height / 2.0 - f * cam[:, 1] / z
    return np.stack([x, y, z], axis=-1)


def project_vertex(camera: Camera, point: Sequence[float]) -> Tuple[float, float, float]:
    """Project one world point to continuous pixel coordinates plus view depth."""
    cam = _camera_coords(camera, np.asarray(point, dtype=np.float64).reshape(1, 3))
    z = float(cam[0, 2])
    if z <= 0:
        raise BehindCameraError(f"point has non-positive view depth {z}")
    pix = _pixels_from_cam(camera, cam)[0]
    return float(pix[0]), float(pix[1]), z


@dataclass(frozen=True)
class RenderMap:
    """Per-pixel nearest-vertex attribution and per-vertex visibility."""

    camera: Camera
    vertex_of_pixel: np.ndarray  # int32 (h, w), -1 for background
    depth: np.ndarray  # float32 (h, w), +inf for background
    visible: np.ndarray  # bool (n,)

    def unproject(self, x: int, y: int) -> Optional[int]:
        if not (0 <= x < self.camera.width and 0 <= y < self.camera.height):
            raise RenderError(f"pixel ({x}, {y}) out of bounds")
        v = int(self.vertex_of_pixel[y, x])
        return None if v < 0 else v


def unproject_pixel(render_map: RenderMap, x: int, y: int) -> Optional[int]:
    return render_map.unproject(x, y)


def render(mesh: Mesh, camera: Camera) -> RenderMap:
    """Z-buffer rasterization of every triangle at integer pixel sample points.

    Each covered pixel is attributed to the face vertex with the largest
    screen-space barycentric weight (ties -> lowest vertex index). Triangles
    touching the near plane are dropped whole.
    """
    w, h = camera.width, camera.height
    n = mesh.vertex_count
    depth = np.full((h, w), np.inf, dtype=np.float64)
    owner = np.full((h, w), -1, dtype=np.int32)

    cam = _camera_coords(camera, mesh.vertices)
    in_front = cam[:, 2] > _NEAR
    pix = np.full((n, 3), np.nan, dtype=np.float64)
    if np.any(in_front):
        pix[in_front] = _pixels_from_cam(camera, cam[in_front])

    for face in mesh.faces:
        i0, i1, i2 = int(face[0]), int(face[1]), int(face[2])
        if not (in_front[i0] and in_front[i1] and in_front[i2]):
            continue
        p0, p1, p2 = pix[i0], pix[i1], pix[i2]
        denom = (p1[1] - p2[1]) * (p0[0] - p2[0]) + (p2[0] - p1[0]) * (p0[1] - p2[1])
        if abs(denom) < 1e-12:
            continue
        x0 = max(0, int(math.ceil(min(p0[0], p1[0], p2[0]))))
        x1 = min(w - 1, int(math.floor(max(p0[0], p1[0], p2[0]))))
        y0 = max(0, int(math.ceil(min(p0[1], p1[1], p2[1]))))
        y1 = min(h - 1, int(math.floor(max(p0[1], p1[1], p2[1]))))
        if x0 > x1 or y0 > y1:
            continue
        xs = np.arange(x0, x1 + 1, dtype=np.float64)
        ys = np.arange(y0, y1 + 1, dtype=np.float64)
        gx, gy = np.meshgrid(xs, ys)
        w0 = ((p1[1] - p2[1]) * (gx - p2[0]) + (p2[0] - p1[0]) * (gy - p2[1])) / denom
        w1 = ((p2[1] - p0[1]) * (gx - p2[0]) + (p0[0] - p2[0]) * (gy - p2[1])) / denom
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        # perspective-correct depth
        inv_z = w0 / p0[2] + w1 / p1[2] + w2 / p2[2]
        with np.errstate(divide="ignore"):
            z = 1.0 / inv_z
        tile = depth[y0 : y1 + 1, x0 : x1 + 1]
        win = inside & (z < tile)
        if not win.any():
            continue
        # per-pixel attribution: max barycentric weight, ties -> lowest vertex index
        order = sorted(range(3), key=lambda c: (i0, i1, i2)[c])
        weights = (w0, w1, w2)
        best_w = np.full(tile.shape, -np.inf)
        best_v = np.zeros(tile.shape, dtype=np.int32)
        for c in order:
            better = weights[c] > best_w
            best_w = np.where(better, weights[c], best_w)
            best_v = np.where(better, (i0, i1, i2)[c], best_v)
        tile[win] = z[win]
        owner_tile = owner[y0 : y1 + 1, x0 : x1 + 1]
        owner_tile[win] = best_v[win]

    eps_z = 1e-3 * camera.radius
    visible = np.zeros(n, dtype=bool)
    attributed = owner[owner >= 0]
    if attributed.size:
        visible[np.unique(attributed)] = True
    for v in range(n):
        if visible[v] or not in_front[v]:
            continue
        rx = int(round(pix[v, 0]))
        ry = int(round(pix[v, 1]))
        if 0 <= rx < w and 0 <= ry < h and np.isfinite(depth[ry, rx]):
            if pix[v, 2] <= depth[ry, rx] + eps_z:
                visible[v] = True

    return RenderMap(camera, owner, depth.astype(np.float32), visible)


def view_grid(
    elevations: Sequence[float] = GRID_ELEVATIONS,
    azimuths: Sequence[float] = GRID_AZIMUTHS,
    radius: float = DEFAULT_RADIUS,
    fov: float = DEFAULT_FOV,
    width: int = DEFAULT_SIZE,
    height: int = DEFAULT_SIZE,
) -> List[Camera]:
    """Cross product of elevations and azimuths, elevation-major order."""
    if not elevations or not azimuths:
        raise RenderError("elevations and azimuths must be non-empty")
    return [
        Camera(float(el), float(az), radius, fov, width, height)
        for el in elevations
        for az in azimuths
    ]


def sample_views(
    count: int,
    seed: int,
    radius: float = DEFAULT_RADIUS,
    fov: float = DEFAULT_FOV,
    width: int = DEFAULT_SIZE,
    height: int = DEFAULT_SIZE,
) -> List[Camera]:
    """Seeded random cameras: elevation uniform in [-90, 90], azimuth in [0, 360)."""
    if count < 1:
        raise RenderError("count must be >= 1")
    rng = np.random.default_rng(seed)
    elevations = rng.uniform(-90.0, 90.0, size=count)
    azimuths = rng.uniform(0.0, 360.0, size=count)
    return [
        Camera(float(el), float(az), radius, fov, width, height)
        for el, az in zip(elevations, azimuths)
    ]


def write_ppm_gray(path, values: np.ndarray) -> None:
    """Dump a float map as an 8-bit P5 PPM (diagnostics only)."""
    finite = np.isfinite(values)
    if finite.any():
        lo = float(values[finite].min())
        hi = float(values[finite].max())
        span = (hi - lo) or 1.0
        scaled = np.where(finite, 255 - ((values - lo) / span * 255.0), 0.0)
    else:
        scaled = np.zeros_like(values)
    img = scaled.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def write_ppm_ids(path, owner: np.ndarray) -> None:
    """Dump a vertex-id map as a P6 PPM; id+1 packed little-endian in RGB."""
    ids = (owner.astype(np.int64) + 1).astype(np.uint32)
    h, w = owner.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    rgb[..., 0] = ids & 0xFF
    rgb[..., 1] = (ids >> 8) & 0xFF
    rgb[..., 2] = (ids >> 16) & 0xFF
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())
