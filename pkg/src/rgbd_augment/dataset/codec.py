"""PNG codecs for depth (KITTI 16-bit convention), RGB and masks."""

from __future__ import annotations

import io
import os
import struct

import numpy as np
from PIL import Image

from ..errors import FormatError

DEPTH_SCALE = 256.0
PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _png_header(data: bytes) -> tuple[int, int, int, int]:
    """Return (width, height, bit depth, color type) from the IHDR chunk."""
    if len(data) < 33 or data[:8] != PNG_SIGNATURE or data[12:16] != b"IHDR":
        raise FormatError("not a PNG file")
    width, height, bit_depth, color_type = struct.unpack(">IIBB", data[16:26])
    return width, height, bit_depth, color_type


def _encode(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def _decode(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.array(im)


def quantize_depth(depth: np.ndarray) -> np.ndarray:
    """Stored uint16 values for a metric depth map (0 stays invalid)."""
    depth = np.asarray(depth, dtype=np.float64)
    good = np.isfinite(depth) & (depth > 0)
    stored = np.zeros(depth.shape, dtype=np.float64)
    stored[good] = np.floor(depth[good] * DEPTH_SCALE + 0.5)
    return np.clip(stored, 0, 65535).astype(np.uint16)


def write_depth_png(depth: np.ndarray) -> bytes:
    return _encode(quantize_depth(depth))


def read_depth_png(data: bytes) -> np.ndarray:
    _, _, bit_depth, color_type = _png_header(data)
    if bit_depth != 16 or color_type != 0:
        raise FormatError(f"depth PNG must be 16-bit grayscale (got bit depth {bit_depth}, color type {color_type})")
    stored = _decode(data).astype(np.float64)
    return stored / DEPTH_SCALE


def write_rgb_png(rgb: np.ndarray) -> bytes:
    rgb = np.asarray(rgb, dtype=np.float64)
    return _encode(np.clip(np.floor(rgb[..., :3] * 255.0 + 0.5), 0, 255).astype(np.uint8))


def read_rgb_png(data: bytes) -> np.ndarray:
    _, _, bit_depth, color_type = _png_header(data)
    if bit_depth != 8 or color_type != 2:
        raise FormatError("RGB PNG must be 8-bit truecolor")
    return _decode(data).astype(np.float64) / 255.0


def write_mask_png(mask: np.ndarray) -> bytes:
    return _encode(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def read_mask_png(data: bytes) -> np.ndarray:
    _, _, bit_depth, color_type = _png_header(data)
    if bit_depth != 8 or color_type != 0:
        raise FormatError("mask PNG must be 8-bit grayscale")
    return _decode(data) > 0


def quantize_rgb(rgb: np.ndarray) -> np.ndarray:
    """The float image a round trip through ``write_rgb_png`` yields."""
    return read_rgb_png(write_rgb_png(rgb))


def save_bytes(path, data: bytes) -> None:
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    with open(path, "wb") as f:
        f.write(data)


def load_bytes(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def load_depth(path) -> np.ndarray:
    return read_depth_png(load_bytes(path))


def load_rgb(path) -> np.ndarray:
    return read_rgb_png(load_bytes(path))


def load_mask(path) -> np.ndarray:
    return read_mask_png(load_bytes(path))
