"""Vision backbones producing coarse feature grids from RGB images.

Two families:

* ``hashpatch``: a deterministic local descriptor (per-patch color/gradient
  statistics pushed through a fixed seeded random projection). No weights, no
  network; pinned by the projection seed in backbones.lock.json. This is what
  CI and the committed golden bundle use.
* ``dinov2``: the real pretrained ViT, loaded lazily through torch.hub.
  Needs torch plus network access to fetch weights; emits 1024 channels.
"""

import json
from pathlib import Path

import numpy as np

LOCKFILE = Path(__file__).resolve().parent.parent.parent / "backbones.lock.json"

HASHPATCH_PATCH = 14
HASHPATCH_SEED = 20240817
HASHPATCH_STATS = 12
DINOV2_CHANNELS = 1024


class HashPatchBackbone:
    """Per-patch statistics (means, spreads, gradients) under a fixed random
    projection. Spatially aware but semantically naive; its sole job is to be
    a deterministic stand-in with the same output shape discipline."""

    name = "hashpatch"

    def __init__(self, channels: int = 64):
        if channels < 1:
            raise ValueError("channels must be >= 1")
        self.channels = channels
        rng = np.random.default_rng(HASHPATCH_SEED)
        self._projection = rng.normal(size=(HASHPATCH_STATS, channels)) / np.sqrt(
            HASHPATCH_STATS
        )

    def grid_features(self, image: np.ndarray) -> np.ndarray:
        """RGB image (h, w, 3) in [0, 1] -> feature grid (h//14, w//14, channels)."""
        h, w, _ = image.shape
        p = HASHPATCH_PATCH
        gh, gw = max(1, h // p), max(1, w // p)
        luma = image @ np.array([0.299, 0.587, 0.114])
        dy = np.abs(np.diff(luma, axis=0, prepend=luma[:1]))
        dx = np.abs(np.diff(luma, axis=1, prepend=luma[:, :1]))
        stats = np.zeros((gh, gw, HASHPATCH_STATS))
        for gy in range(gh):
            for gx in range(gw):
                ys = slice(gy * p, (gy + 1) * p if gy < gh - 1 else h)
                xs = slice(gx * p, (gx + 1) * p if gx < gw - 1 else w)
                patch = image[ys, xs]
                pl = luma[ys, xs]
                stats[gy, gx] = [
                    patch[..., 0].mean(),
                    patch[..., 1].mean(),
                    patch[..., 2].mean(),
                    patch[..., 0].std(),
                    patch[..., 1].std(),
                    patch[..., 2].std(),
                    dx[ys, xs].mean(),
                    dy[ys, xs].mean(),
                    pl.min(),
                    pl.max(),
                    (pl**2).mean(),
                    np.median(pl),
                ]
        return (stats @ self._projection).astype(np.float32)


class DinoV2Backbone:
    """DINOv2 ViT-L/14 patch features via torch.hub (lazy; needs weights)."""

    name = "dinov2"
    channels = DINOV2_CHANNELS

    def __init__(self):
        import torch  # deferred so the local backbone works without it

        self._torch = torch
        self._model = torch.hub.load("facebookresearch/dinov2", "dinov2_vitl14")
        self._model.eval()

    def grid_features(self, image: np.ndarray) -> np.ndarray:
        torch = self._torch
        h, w, _ = image.shape
        gh, gw = h // 14, w // 14
        tensor = torch.from_numpy(image.astype(np.float32)).permute(2, 0, 1)[None]
        mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
        std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
        tensor = (tensor - mean) / std
        with torch.no_grad():
            out = self._model.forward_features(tensor)["x_norm_patchtokens"]
        return out[0].reshape(gh, gw, self.channels).numpy().astype(np.float32)


def make_backbone(name: str, channels: int = 64):
    if name == "hashpatch":
        return HashPatchBackbone(channels)
    if name == "dinov2":
        return DinoV2Backbone()
    raise ValueError(f"unknown backbone {name!r}")


def lockfile_entries() -> dict:
    return json.loads(LOCKFILE.read_text())


def bilinear_upsample(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a (gh, gw, d) grid to (out_h, out_w, d), half-pixel centers."""
    gh, gw, d = grid.shape
    ys = (np.arange(out_h) + 0.5) * gh / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * gw / out_w - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, gh - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, gw - 1)
    y1 = np.clip(y0 + 1, 0, gh - 1)
    x1 = np.clip(x0 + 1, 0, gw - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = grid[y0][:, x0] * (1 - wx) + grid[y0][:, x1] * wx
    bottom = grid[y1][:, x0] * (1 - wx) + grid[y1][:, x1] * wx
    return (top * (1 - wy) + bottom * wy).astype(np.float32)
