"""Pinhole camera model: unprojection of depth maps and z-buffered reprojection.

Depth maps and occupancy masks are plain numpy arrays of shape
``(height, width)`` indexed ``[v, u]``.  Depth is in meters with ``0``
marking invalid pixels; masks are boolean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import InputError
from .pose import Pose


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise InputError("image size must be at least 1x1")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InputError("principal point must lie inside the image")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def as_list(self) -> list:
        return [float(self.fx), float(self.fy), float(self.cx), float(self.cy), int(self.width), int(self.height)]

    @classmethod
    def from_list(cls, values) -> "CameraIntrinsics":
        fx, fy, cx, cy, w, h = values
        return cls(float(fx), float(fy), float(cx), float(cy), int(round(float(w))), int(round(float(h))))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """World-frame points (N, 3) with optional colors (N, 3) in [0, 1]."""

    points: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InputError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.colors is not None:
            cols = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
            if len(cols) != len(pts):
                raise InputError("colors must have one row per point")
            object.__setattr__(self, "colors", cols)

    def __len__(self):
        return len(self.points)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)))

    @classmethod
    def concat(cls, clouds) -> "PointCloud":
        clouds = list(clouds)
        if not clouds:
            return cls.empty()
        pts = np.concatenate([c.points for c in clouds])
        if all(c.colors is not None for c in clouds):
            return cls(pts, np.concatenate([c.colors for c in clouds]))
        return cls(pts)


def check_depth(depth: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != intr.shape:
        raise InputError(f"depth map is {depth.shape}, intrinsics expect {intr.shape}")
    return depth


def valid_mask(depth: np.ndarray) -> np.ndarray:
    return np.isfinite(depth) & (depth > 0)


def unproject(depth: np.ndarray, intr: CameraIntrinsics, pose: Pose, rgb: Optional[np.ndarray] = None) -> PointCloud:
    """Lift every valid pixel to a world-frame point, row-major over pixels."""
    depth = check_depth(depth, intr)
    v, u = np.nonzero(valid_mask(depth))
    d = depth[v, u]
    cam = np.stack([(u - intr.cx) / intr.fx * d, (v - intr.cy) / intr.fy * d, d], axis=1)
    colors = None
    if rgb is not None:
        rgb = np.asarray(rgb, dtype=np.float64)
        if rgb.shape[:2] != intr.shape:
            raise InputError("rgb and depth dimensions disagree")
        colors = rgb[v, u, :3]
    return PointCloud(pose.transform(cam), colors)


def round_half_down(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer, sending exact .5 ties to the lower index."""
    return np.ceil(x - 0.5)


@dataclass(frozen=True)
class Projection:
    """Per-point projection result, restricted to points that hit the image."""

    index: np.ndarray  # into the source cloud
    u: np.ndarray  # integer pixel column
    v: np.ndarray  # integer pixel row
    z: np.ndarray  # camera-frame depth
    du: np.ndarray  # continuous column minus pixel center
    dv: np.ndarray


def project_points(points: np.ndarray, intr: CameraIntrinsics, pose: Pose) -> Projection:
    cam = pose.to_camera(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    z = cam[:, 2]
    front = z > 0
    idx = np.nonzero(front)[0]
    cam, z = cam[front], z[front]
    uc = intr.fx * cam[:, 0] / z + intr.cx
    vc = intr.fy * cam[:, 1] / z + intr.cy
    u = round_half_down(uc)
    v = round_half_down(vc)
    inside = (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    return Projection(
        index=idx[inside],
        u=u[inside].astype(np.int64),
        v=v[inside].astype(np.int64),
        z=z[inside],
        du=(uc - u)[inside],
        dv=(vc - v)[inside],
    )


def project(cloud: PointCloud, intr: CameraIntrinsics, pose: Pose) -> np.ndarray:
    """Z-buffered projection of a cloud into a depth map (nearest point wins)."""
    proj = project_points(cloud.points, intr, pose)
    depth = np.full(intr.height * intr.width, np.inf)
    np.minimum.at(depth, proj.v * intr.width + proj.u, proj.z)
    depth[np.isinf(depth)] = 0.0
    return depth.reshape(intr.shape)


def occupancy_mask(cloud: PointCloud, intr: CameraIntrinsics, novel_pose: Pose, radius: int = 0) -> np.ndarray:
    """Pixels hit by at least one point in front of the camera.

    With ``radius > 0`` the mask also covers the gaps a splat footprint of
    that radius fills (see :func:`fill_gaps`), matching the renderer.
    """
    proj = project_points(cloud.points, intr, novel_pose)
    mask = np.zeros(intr.shape, dtype=bool)
    mask[proj.v, proj.u] = True
    if radius > 0:
        mask = fill_gaps(mask, radius)
    return mask


def _shift(mask: np.ndarray, offset: int, axis: int) -> np.ndarray:
    """``out[i] = mask[i + offset]`` along ``axis``, False past the border."""
    out = np.zeros_like(mask)
    n = mask.shape[axis]
    if abs(offset) >= n:
        return out
    src = [slice(None)] * 2
    dst = [slice(None)] * 2
    if offset > 0:
        src[axis], dst[axis] = slice(offset, None), slice(None, n - offset)
    else:
        src[axis], dst[axis] = slice(None, n + offset), slice(-offset, None)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def fill_gaps(hits: np.ndarray, radius: int) -> np.ndarray:
    """Hits plus every pixel with a hit within ``radius`` on both sides along a row or column.

    Gaps inside observed geometry (e.g. between LiDAR rows) get filled while
    silhouettes do not grow into empty space.  Monotone in ``radius``.
    """
    out = hits.copy()
    for axis in (0, 1):
        before = np.zeros_like(hits)
        after = np.zeros_like(hits)
        for k in range(1, radius + 1):
            before |= _shift(hits, -k, axis)
            after |= _shift(hits, k, axis)
        out |= before & after
    return out
