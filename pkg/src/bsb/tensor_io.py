"""Binary tensor containers (BSBT), typed wrappers, and dataset manifests.

BSBT layout, all integers little-endian:

    magic   4 bytes  b"BSBT"
    version u32      currently 1
    dtype   u32      1 = f32, 2 = u8
    ndim    u32      number of extents
    dims    ndim*u64 extents, outermost first
    payload           row-major elements
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, List, Optional, Tuple, Union

import numpy as np

from .errors import FormatError

MAGIC = b"BSBT"
VERSION = 1

DTYPE_F32 = 1
DTYPE_U8 = 2

_DTYPE_NAMES = {DTYPE_F32: "f32", DTYPE_U8: "u8"}
_NUMPY_DTYPES = {DTYPE_F32: np.dtype("<f4"), DTYPE_U8: np.dtype("u1")}
_MAX_NDIM = 16


@dataclass(frozen=True)
class TensorContainer:
    """A dense tensor with an explicit on-disk dtype and shape."""

    dtype: int
    dims: Tuple[int, ...]
    data: np.ndarray  # flat, C-order, little-endian

    def __post_init__(self):
        if self.dtype not in _NUMPY_DTYPES:
            raise FormatError(f"unsupported dtype code {self.dtype}")
        if not self.dims:
            raise FormatError("dims must be non-empty")
        if any(d < 1 for d in self.dims):
            raise FormatError(f"every extent must be >= 1, got {self.dims}")
        expected = int(np.prod(self.dims, dtype=np.int64))
        if self.data.size != expected:
            raise FormatError(
                f"payload has {self.data.size} elements, dims {self.dims} imply {expected}"
            )

    @classmethod
    def from_array(cls, array: np.ndarray) -> "TensorContainer":
        if array.dtype == np.float32:
            code = DTYPE_F32
        elif array.dtype == np.uint8:
            code = DTYPE_U8
        else:
            raise FormatError(f"unsupported array dtype {array.dtype}")
        flat = np.ascontiguousarray(array, dtype=_NUMPY_DTYPES[code]).reshape(-1)
        return cls(code, tuple(int(d) for d in array.shape), flat)

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.dims)

    @property
    def dtype_name(self) -> str:
        return _DTYPE_NAMES[self.dtype]

    @property
    def nbytes(self) -> int:
        return self.data.size * _NUMPY_DTYPES[self.dtype].itemsize


def write_tensor(t: TensorContainer, sink: Union[BinaryIO, str, Path]) -> None:
    """Serialize a container to the BSBT wire format."""
    header = MAGIC + struct.pack("<III", VERSION, t.dtype, len(t.dims))
    header += struct.pack(f"<{len(t.dims)}Q", *t.dims)
    payload = np.ascontiguousarray(t.data, dtype=_NUMPY_DTYPES[t.dtype]).tobytes()
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    else:
        sink.write(header)
        sink.write(payload)


def _read_exact(source: BinaryIO, count: int, what: str) -> bytes:
    buf = source.read(count)
    if len(buf) != count:
        raise FormatError(f"truncated stream while reading {what}")
    return buf


def read_tensor(source: Union[BinaryIO, bytes, str, Path]) -> TensorContainer:
    """Parse one BSBT tensor. File and bytes sources must contain exactly one."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            t = read_tensor(fh)
            if fh.read(1):
                raise FormatError(f"trailing bytes after tensor in {source}")
            return t
    if isinstance(source, (bytes, bytearray)):
        import io

        fh = io.BytesIO(source)
        t = read_tensor(fh)
        if fh.read(1):
            raise FormatError("trailing bytes after tensor")
        return t

    magic = _read_exact(source, 4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, dtype, ndim = struct.unpack("<III", _read_exact(source, 12, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype not in _NUMPY_DTYPES:
        raise FormatError(f"unsupported dtype code {dtype}")
    if ndim < 1 or ndim > _MAX_NDIM:
        raise FormatError(f"ndim {ndim} out of range [1, {_MAX_NDIM}]")
    dims = struct.unpack(f"<{ndim}Q", _read_exact(source, 8 * ndim, "dims"))
    if any(d < 1 for d in dims):
        raise FormatError(f"zero extent in dims {dims}")
    count = int(np.prod(dims, dtype=np.int64))
    np_dtype = _NUMPY_DTYPES[dtype]
    payload = _read_exact(source, count * np_dtype.itemsize, "payload")
    data = np.frombuffer(payload, dtype=np_dtype).copy()
    return TensorContainer(dtype, tuple(int(d) for d in dims), data)


@dataclass(frozen=True)
class FeatureImage:
    """Dense per-pixel feature field, indexed ``data[y, x, channel]``."""

    data: np.ndarray  # float32 (h, w, d)
    source_res: Optional[Tuple[int, int]] = None  # (w', h') of the raw backbone grid

    def __post_init__(self):
        if self.data.ndim != 3:
            raise FormatError(f"feature image must be (h, w, d), got {self.data.shape}")
        if self.data.dtype != np.float32:
            raise FormatError(f"feature image must be float32, got {self.data.dtype}")
        if self.data.shape[2] < 1:
            raise FormatError("feature dimension must be >= 1")
        if not np.all(np.isfinite(self.data)):
            raise FormatError("feature image contains NaN/Inf")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def at(self, x: int, y: int) -> np.ndarray:
        if not self.in_bounds(x, y):
            raise FormatError(f"pixel ({x}, {y}) out of bounds {self.width}x{self.height}")
        return self.data[y, x]

    @classmethod
    def from_container(
        cls, t: TensorContainer, source_res: Optional[Tuple[int, int]] = None
    ) -> "FeatureImage":
        if t.dtype != DTYPE_F32 or len(t.dims) != 3:
            raise FormatError(f"expected f32 [h, w, d] container, got {t.dtype_name} {t.dims}")
        return cls(t.to_array(), source_res)

    def to_container(self) -> TensorContainer:
        return TensorContainer.from_array(self.data)


@dataclass(frozen=True)
class VertexFeatureField:
    """Per-vertex distilled features with a validity flag per vertex.

    Rows flagged invalid are all-zero and never participate in matching.
    """

    data: np.ndarray  # float32 (n, d)
    valid: np.ndarray  # bool (n,)

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != np.float32:
            raise FormatError("vertex features must be float32 (n, d)")
        if self.valid.shape != (self.data.shape[0],):
            raise FormatError("valid flags must have one entry per vertex")
        if self.data.shape[0] and np.any(self.data[~self.valid] != 0):
            raise FormatError("invalid vertex rows must be all-zero")
        if self.data.shape[0] and not np.all(np.isfinite(self.data[self.valid])):
            raise FormatError("valid vertex rows contain NaN/Inf")

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_container(cls, t: TensorContainer) -> "VertexFeatureField":
        """Validity is recovered as the set of rows that are not all-zero."""
        if t.dtype != DTYPE_F32 or len(t.dims) != 2:
            raise FormatError(f"expected f32 [n, d] container, got {t.dtype_name} {t.dims}")
        data = t.to_array()
        valid = np.any(data != 0, axis=1)
        return cls(data, valid)

    def to_container(self) -> TensorContainer:
        return TensorContainer.from_array(self.data)


def _check_binary(bits: np.ndarray, what: str) -> None:
    if bits.dtype != np.uint8:
        raise FormatError(f"{what} must be uint8")
    bad = (bits != 0) & (bits != 1)
    if np.any(bad):
        raise FormatError(f"{what} contains values outside {{0, 1}}")


@dataclass(frozen=True)
class Mask2D:
    """Binary pixel mask, ``bits[y, x]`` in {0, 1}."""

    bits: np.ndarray  # uint8 (h, w)

    def __post_init__(self):
        if self.bits.ndim != 2:
            raise FormatError(f"2D mask must be (h, w), got {self.bits.shape}")
        _check_binary(self.bits, "2D mask")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height and self.bits[y, x] == 1

    def area(self) -> int:
        return int(self.bits.sum())

    def is_subset_of(self, other: "Mask2D") -> bool:
        return self.bits.shape == other.bits.shape and bool(
            np.all(self.bits <= other.bits)
        )

    @classmethod
    def from_container(cls, t: TensorContainer) -> "Mask2D":
        if t.dtype != DTYPE_U8 or len(t.dims) != 2:
            raise FormatError(f"expected u8 [h, w] container, got {t.dtype_name} {t.dims}")
        return cls(t.to_array())

    def to_container(self) -> TensorContainer:
        return TensorContainer.from_array(self.bits)


@dataclass(frozen=True)
class Mask3D:
    """Binary vertex mask over a mesh with ``count`` vertices."""

    bits: np.ndarray  # uint8 (n,)

    def __post_init__(self):
        if self.bits.ndim != 1:
            raise FormatError(f"3D mask must be flat, got shape {self.bits.shape}")
        _check_binary(self.bits, "3D mask")

    @property
    def count(self) -> int:
        return self.bits.shape[0]

    def contains(self, v: int) -> bool:
        return 0 <= v < self.count and self.bits[v] == 1

    def indices(self) -> np.ndarray:
        return np.nonzero(self.bits)[0]

    def area(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def empty(cls, n: int) -> "Mask3D":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def from_container(cls, t: TensorContainer) -> "Mask3D":
        if t.dtype != DTYPE_U8 or len(t.dims) != 1:
            raise FormatError(f"expected u8 [n] container, got {t.dtype_name} {t.dims}")
        return cls(t.to_array())

    def to_container(self) -> TensorContainer:
        return TensorContainer.from_array(self.bits)


@dataclass(frozen=True)
class ManifestCase:
    """One correspondence instance, referencing containers on disk."""

    name: str
    image_features: Path
    part_mask: Path
    object_mask: Path
    vertex_features: Path
    mesh: Path
    click: Tuple[int, int]
    gt_part: Tuple[int, ...]
    seg2d: Optional[str] = None  # provider spec; defaults to the case's own masks
    regions: Tuple[dict, ...] = ()  # [{"mask": Path, "has_counterpart": bool}]
    view: Optional[dict] = None


@dataclass(frozen=True)
class DatasetManifest:
    cases: Tuple[ManifestCase, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.cases)


_REQUIRED_CASE_KEYS = (
    "image_features",
    "part_mask",
    "object_mask",
    "vertex_features",
    "mesh",
    "click",
    "gt_part",
    "name",
)


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Every referenced container is opened and cross-checked: mask dims must
    match the feature image, clicks must be in bounds, and ground-truth
    vertex indices must fit the vertex feature field.
    """
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("cases"), list):
        raise FormatError('manifest must be an object with a "cases" list')

    base = path.parent
    cases: List[ManifestCase] = []
    for i, raw in enumerate(doc["cases"]):
        if not isinstance(raw, dict):
            raise FormatError(f"case {i} is not an object")
        missing = [k for k in _REQUIRED_CASE_KEYS if k not in raw]
        if missing:
            raise FormatError(f"case {i} missing keys: {missing}")

        def resolve(key: str) -> Path:
            p = Path(raw[key])
            p = p if p.is_absolute() else base / p
            if not p.is_file():
                raise FormatError(f"case {i}: referenced path does not resolve: {p}")
            return p

        paths = {k: resolve(k) for k in ("image_features", "part_mask", "object_mask", "vertex_features", "mesh")}
        feat = FeatureImage.from_container(read_tensor(paths["image_features"]))
        part = Mask2D.from_container(read_tensor(paths["part_mask"]))
        obj = Mask2D.from_container(read_tensor(paths["object_mask"]))
        vfield = VertexFeatureField.from_container(read_tensor(paths["vertex_features"]))

        for mask, label in ((part, "part_mask"), (obj, "object_mask")):
            if (mask.height, mask.width) != (feat.height, feat.width):
                raise FormatError(
                    f"case {i}: {label} dims {mask.width}x{mask.height} do not match "
                    f"feature image {feat.width}x{feat.height}"
                )
        click = raw["click"]
        if (
            not isinstance(click, (list, tuple))
            or len(click) != 2
            or not all(isinstance(c, int) for c in click)
        ):
            raise FormatError(f"case {i}: click must be [x, y] integers")
        x, y = click
        if not (0 <= x < feat.width and 0 <= y < feat.height):
            raise FormatError(f"case {i}: click ({x}, {y}) outside image bounds")
        gt = raw["gt_part"]
        if not isinstance(gt, list) or not all(isinstance(g, int) for g in gt):
            raise FormatError(f"case {i}: gt_part must be a list of vertex indices")
        if any(g < 0 or g >= vfield.count for g in gt):
            raise FormatError(f"case {i}: gt_part index out of range [0, {vfield.count})")

        regions = []
        for j, reg in enumerate(raw.get("regions", ())):
            rp = Path(reg["mask"])
            rp = rp if rp.is_absolute() else base / rp
            if not rp.is_file():
                raise FormatError(f"case {i} region {j}: path does not resolve: {rp}")
            regions.append({"mask": rp, "has_counterpart": bool(reg["has_counterpart"])})

        cases.append(
            ManifestCase(
                name=str(raw["name"]),
                image_features=paths["image_features"],
                part_mask=paths["part_mask"],
                object_mask=paths["object_mask"],
                vertex_features=paths["vertex_features"],
                mesh=paths["mesh"],
                click=(x, y),
                gt_part=tuple(gt),
                seg2d=raw.get("seg2d"),
                regions=tuple(regions),
                view=raw.get("view"),
            )
        )
    return DatasetManifest(tuple(cases))
