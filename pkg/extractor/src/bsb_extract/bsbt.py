"""Minimal writer/reader for the engine's BSBT tensor wire format.

Kept self-contained on purpose: the binary layout is the contract between
this sidecar and the engine, so the sidecar carries its own implementation
and the interop tests prove both ends agree byte for byte.
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"BSBT"
VERSION = 1
DTYPE_F32 = 1
DTYPE_U8 = 2

_NUMPY = {DTYPE_F32: np.dtype("<f4"), DTYPE_U8: np.dtype("u1")}


def write_array(array: np.ndarray, path) -> None:
    """Serialize a float32 or uint8 array, atomically (tmp + rename)."""
    if array.dtype == np.float32:
        code = DTYPE_F32
    elif array.dtype == np.uint8:
        code = DTYPE_U8
    else:
        raise ValueError(f"unsupported dtype {array.dtype}")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    header = MAGIC + struct.pack("<III", VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(array, dtype=_NUMPY[code]).tobytes())
    tmp.replace(path)


def read_array(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"bad magic in {path}")
    version, code, ndim = struct.unpack("<III", raw[4:16])
    if version != VERSION or code not in _NUMPY:
        raise ValueError(f"unsupported header in {path}")
    dims = struct.unpack(f"<{ndim}Q", raw[16 : 16 + 8 * ndim])
    dtype = _NUMPY[code]
    offset = 16 + 8 * ndim
    count = int(np.prod(dims))
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    return data.reshape(dims).copy()
