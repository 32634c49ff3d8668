"""Segment-to-segment correspondence between 2D images and untextured 3D meshes."""

__version__ = "0.1.0"

from .errors import (
    BehindCameraError,
    BsbError,
    EvalError,
    FormatError,
    MatchError,
    MeshError,
    ProviderError,
    RenderError,
)
from .matcher import (
    ClickContext,
    MatchResult,
    ReverseMatchResult,
    bsb_match,
    bsb_match_reverse,
    cosine_similarity,
    mask_iou,
    nearest_pixel,
    nn_baseline,
    random_candidate_baseline,
    top_k_candidates,
)
from .mesh import Mesh, connected_component, load_mesh, normalize_mesh
from .rasterizer import Camera, RenderMap, project_vertex, render, sample_views, unproject_pixel, view_grid
from .segmenters import correspond, file_backed_seg2d, file_backed_seg3d, floodfill_seg3d, synthetic_seg2d
from .tensor_io import (
    FeatureImage,
    Mask2D,
    Mask3D,
    TensorContainer,
    VertexFeatureField,
    load_manifest,
    read_tensor,
    write_tensor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
