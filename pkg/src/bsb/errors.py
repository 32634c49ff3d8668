"""Exception types shared across the package."""


class BsbError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(BsbError):
    """Malformed or inconsistent container / manifest data."""


class MeshError(BsbError):
    """Invalid mesh file or mesh operation."""


class RenderError(BsbError):
    """Invalid camera or rasterization request."""


class BehindCameraError(RenderError):
    """A point projected with non-positive depth along the view axis."""


class MatchError(BsbError):
    """Matching preconditions violated (empty masks, zero-norm features, ...)."""


class ProviderError(BsbError):
    """A segmentation provider could not answer a query."""


class EvalError(BsbError):
    """Evaluation harness misuse (empty manifest, zero-area region, ...)."""
