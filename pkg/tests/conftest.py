import struct
import zlib
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rgbd_augment.geometry import CameraIntrinsics, Pose

DATA = Path(__file__).parent / "data"


def random_pose(rng: np.random.Generator, scale: float = 10.0) -> Pose:
    R = Rotation.from_rotvec(rng.normal(size=3) * 0.7).as_matrix()
    return Pose(R, rng.normal(size=3) * scale)


def random_intrinsics(rng: np.random.Generator, max_side: int = 64) -> CameraIntrinsics:
    w = int(rng.integers(2, max_side + 1))
    h = int(rng.integers(2, max_side + 1))
    f = float(rng.uniform(20, 120))
    return CameraIntrinsics(f * rng.uniform(0.8, 1.2), f, rng.uniform(0, w - 1), rng.uniform(0, h - 1), w, h)


def random_sparse_depth(rng: np.random.Generator, intr: CameraIntrinsics, keep: float = 0.5) -> np.ndarray:
    depth = rng.uniform(0.5, 80.0, size=intr.shape)
    depth[rng.random(intr.shape) > keep] = 0.0
    return depth


def inflate_png(data: bytes) -> tuple[int, int, int, int, np.ndarray]:
    """Minimal PNG reader (grayscale/truecolor, no interlace) used as an independent oracle."""
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos, idat = 8, b""
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        kind = data[pos + 4:pos + 8]
        body = data[pos + 8:pos + 8 + length]
        if kind == b"IHDR":
            w, h, bit_depth, color_type, _, _, interlace = struct.unpack(">IIBBBBB", body)
            assert interlace == 0
        elif kind == b"IDAT":
            idat += body
        pos += 12 + length
    channels = {0: 1, 2: 3}[color_type]
    bpp = channels * bit_depth // 8
    stride = w * bpp
    raw = zlib.decompress(idat)
    out = np.zeros((h, stride), dtype=np.int64)
    prev = np.zeros(stride, dtype=np.int64)
    for y in range(h):
        ftype = raw[y * (stride + 1)]
        line = np.frombuffer(raw, dtype=np.uint8, count=stride, offset=y * (stride + 1) + 1).astype(np.int64)
        cur = np.zeros(stride, dtype=np.int64)
        for x in range(stride):
            a = cur[x - bpp] if x >= bpp else 0
            b = prev[x]
            c = prev[x - bpp] if x >= bpp else 0
            if ftype == 0:
                pred = 0
            elif ftype == 1:
                pred = a
            elif ftype == 2:
                pred = b
            elif ftype == 3:
                pred = (a + b) // 2
            else:
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
            cur[x] = (line[x] + pred) & 0xFF
        out[y] = cur
        prev = cur
    if bit_depth == 16:
        vals = out[:, 0::2] * 256 + out[:, 1::2]
    else:
        vals = out
    return w, h, bit_depth, color_type, vals.reshape(h, w, channels).squeeze(-1) if channels == 1 else vals.reshape(h, w, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
