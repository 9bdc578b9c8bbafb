"""Image sources: a directory of image files, or an IDX ubyte tensor file
(the common handwritten-digit layout: magic, dims, unsigned bytes).

Both sources yield uint8 arrays of shape (H, W) or (H, W, 3); undecodable
directory entries are skipped and reported, never fatal on their own.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ExtractionError, FormatError

_IDX_UBYTE = 0x08


def load_idx(path) -> np.ndarray:
    """Read an IDX file of unsigned bytes with 3 dims -> (N, H, W) uint8."""
    blob = Path(path).read_bytes()
    if len(blob) < 4:
        raise FormatError(f"{path}: truncated IDX header")
    zero1, zero2, dtype, ndim = blob[0], blob[1], blob[2], blob[3]
    if zero1 != 0 or zero2 != 0:
        raise FormatError(f"{path}: bad IDX magic")
    if dtype != _IDX_UBYTE:
        raise FormatError(f"{path}: unsupported IDX dtype 0x{dtype:02x} (want ubyte)")
    if ndim != 3:
        raise FormatError(f"{path}: need a 3-D image tensor, got {ndim} dims")
    header_end = 4 + 4 * ndim
    if len(blob) < header_end:
        raise FormatError(f"{path}: truncated IDX dimension block")
    dims = struct.unpack(f">{ndim}I", blob[4:header_end])
    expected = int(np.prod(dims))
    payload = blob[header_end:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, dims {dims} need {expected}"
        )
    # copy: frombuffer yields a read-only view, torch wants writable memory
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims).copy()


def load_image_dir(path) -> tuple[list[np.ndarray], list[str]]:
    """Decode every file in a directory (sorted by name).

    Returns (images, skipped-file names). Undecodable files are skipped."""
    root = Path(path)
    files = sorted(p for p in root.iterdir() if p.is_file())
    if not files:
        raise ExtractionError(f"{path}: no files to extract from")
    images: list[np.ndarray] = []
    skipped: list[str] = []
    for p in files:
        try:
            with Image.open(p) as img:
                img = img.convert("RGB")
                images.append(np.asarray(img, dtype=np.uint8))
        except (UnidentifiedImageError, OSError):
            skipped.append(p.name)
    return images, skipped


def load_source(path) -> tuple[list[np.ndarray], list[str]]:
    """Dispatch on the input kind: directory of images, or one IDX file."""
    p = Path(path)
    if p.is_dir():
        images, skipped = load_image_dir(p)
    else:
        images, skipped = [frame for frame in load_idx(p)], []
    if not images:
        raise ExtractionError(f"{path}: zero usable images")
    return images, skipped
