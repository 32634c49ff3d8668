"""Backbone extraction sidecar: writes BSBT features and masks for the engine."""

__version__ = "0.1.0"

from .backbones import HashPatchBackbone, bilinear_upsample, make_backbone
from .bsbt import read_array, write_array
from .extract import (
    extract_image_features,
    extract_masks,
    extract_view_features,
    grid_clicks,
    load_image,
)
