"""ACTB activation-file writer.

Byte layout (little-endian): magic "ACTB", u32 version=1, u64 N, u64 D,
u16 length + UTF-8 layer tag, u16 length + UTF-8 source tag, then N*D
float32 values row-major. This mirrors the consumer engine's on-disk
contract; the file is the interface between the two packages.
"""

import struct

import numpy as np

_HEADER = struct.Struct("<4sIQQ")
_TAGLEN = struct.Struct("<H")


def write_actb(path, data: np.ndarray, layer_tag: str, source_tag: str) -> None:
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"activations must be a non-empty 2-D matrix, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("activations contain non-finite values")
    layer = layer_tag.encode("utf-8")
    source = source_tag.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"ACTB", 1, arr.shape[0], arr.shape[1]))
        fh.write(_TAGLEN.pack(len(layer)) + layer)
        fh.write(_TAGLEN.pack(len(source)) + source)
        fh.write(arr.tobytes())
