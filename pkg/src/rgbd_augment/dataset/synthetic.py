"""Analytic street scenes rendered by exact ray casting.

World frame is z-up with the ground at ``z = 0``.  Buildings are
axis-aligned boxes and poles are vertical cylinders standing on the ground.
Because every ray is intersected analytically, :meth:`SyntheticScene.depth`
serves as a ground-truth oracle for any pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import InputError
from ..geometry import CameraIntrinsics, Pose, axis_rotation
from .scene import Frame

GROUND_ID = 0


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple


@dataclass(frozen=True)
class Cylinder:
    x: float
    y: float
    radius: float
    height: float


@dataclass(frozen=True)
class SceneSpec:
    width: int = 96
    height: int = 48
    fx: float = 60.0
    fy: float = 60.0
    cx: Optional[float] = None
    cy: Optional[float] = None
    camera_height: float = 1.65
    pitch_deg: float = 0.0  # positive tilts the camera down
    trajectory: str = "straight"  # or "arc"
    n_frames: int = 20
    step: float = 1.0
    arc_radius: float = 60.0
    ground: bool = True
    boxes: Optional[tuple] = None  # None -> random layout from the seed
    cylinders: Optional[tuple] = None
    n_boxes: int = 6
    n_cylinders: int = 4
    max_range: float = 80.0
    lidar_row_stride: int = 1  # keep every k-th row, emulating LiDAR sparsity
    dropout: float = 0.0  # random fraction of remaining pixels to drop

    @property
    def intrinsics(self) -> CameraIntrinsics:
        cx = (self.width - 1) / 2.0 if self.cx is None else self.cx
        cy = (self.height - 1) / 2.0 if self.cy is None else self.cy
        return CameraIntrinsics(self.fx, self.fy, cx, cy, self.width, self.height)


def level_camera(position, heading_rad: float, pitch_deg: float = 0.0) -> Pose:
    """Camera-to-world pose for a camera looking along ``heading`` in the xy-plane."""
    c, s = np.cos(heading_rad), np.sin(heading_rad)
    R = np.column_stack([[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]])
    if pitch_deg:
        R = R @ axis_rotation("x", -np.radians(pitch_deg))
    return Pose(R, np.asarray(position, dtype=np.float64))


def trajectory_poses(spec: SceneSpec) -> list[Pose]:
    poses = []
    for i in range(spec.n_frames):
        arc = i * spec.step
        if spec.trajectory == "straight":
            pos, heading = (arc, 0.0, spec.camera_height), 0.0
        elif spec.trajectory == "arc":
            ang = arc / spec.arc_radius
            pos = (spec.arc_radius * np.sin(ang), spec.arc_radius * (1 - np.cos(ang)), spec.camera_height)
            heading = ang
        else:
            raise InputError(f"unknown trajectory {spec.trajectory!r}")
        poses.append(level_camera(pos, heading, spec.pitch_deg))
    return poses


def _random_layout(spec: SceneSpec, rng: np.random.Generator) -> tuple[tuple, tuple]:
    """Buildings on both sides of the road, poles along the curb."""
    length = max(spec.n_frames * spec.step, 10.0) + 40.0
    boxes = []
    for k in range(spec.n_boxes):
        side = 1.0 if k % 2 == 0 else -1.0
        x0 = rng.uniform(0.0, length - 8.0)
        d = rng.uniform(6.0, 12.0)
        w = rng.uniform(4.0, 10.0)
        h = rng.uniform(4.0, 12.0)
        near = rng.uniform(6.0, 10.0)
        y_lo, y_hi = (near, near + d) if side > 0 else (-near - d, -near)
        boxes.append(Box((x0, y_lo, 0.0), (x0 + w, y_hi, h)))
    cylinders = []
    for k in range(spec.n_cylinders):
        side = 1.0 if k % 2 == 0 else -1.0
        cylinders.append(Cylinder(rng.uniform(5.0, length - 5.0), side * rng.uniform(3.5, 5.0),
                                  rng.uniform(0.15, 0.4), rng.uniform(3.0, 6.0)))
    return tuple(boxes), tuple(cylinders)


def _pixel_rays(intr: CameraIntrinsics, pose: Pose) -> np.ndarray:
    v, u = np.mgrid[0:intr.height, 0:intr.width]
    cam = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones(u.shape)], axis=-1).reshape(-1, 3)
    return cam @ pose.rotation.T


def _hit_box(o: np.ndarray, d: np.ndarray, box: Box) -> np.ndarray:
    t_near = np.full(len(d), -np.inf)
    t_far = np.full(len(d), np.inf)
    for ax in range(3):
        lo, hi, oa, da = box.lo[ax], box.hi[ax], o[ax], d[:, ax]
        par = da == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - oa) / da
            t2 = (hi - oa) / da
        tmin = np.where(par, np.where((lo <= oa) & (oa <= hi), -np.inf, np.inf), np.minimum(t1, t2))
        tmax = np.where(par, np.where((lo <= oa) & (oa <= hi), np.inf, -np.inf), np.maximum(t1, t2))
        t_near = np.maximum(t_near, tmin)
        t_far = np.minimum(t_far, tmax)
    return np.where((t_near <= t_far) & (t_near > 0), t_near, np.inf)


def _hit_cylinder(o: np.ndarray, d: np.ndarray, cyl: Cylinder) -> np.ndarray:
    ox, oy = o[0] - cyl.x, o[1] - cyl.y
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2.0 * (d[:, 0] * ox + d[:, 1] * oy)
    c = ox * ox + oy * oy - cyl.radius ** 2
    disc = b * b - 4 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        t_side = (-b - np.sqrt(disc)) / (2 * a)
        z = o[2] + t_side * d[:, 2]
        side_ok = (a > 0) & (disc >= 0) & (t_side > 0) & (z >= 0) & (z <= cyl.height)
        t_side = np.where(side_ok, t_side, np.inf)
        t_cap = (cyl.height - o[2]) / d[:, 2]
        px = ox + t_cap * d[:, 0]
        py = oy + t_cap * d[:, 1]
        cap_ok = (d[:, 2] != 0) & (t_cap > 0) & (px * px + py * py <= cyl.radius ** 2)
    t_cap = np.where(cap_ok, t_cap, np.inf)
    return np.minimum(t_side, t_cap)


def _hit_ground(o: np.ndarray, d: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -o[2] / d[:, 2]
    return np.where((d[:, 2] < 0) & (t > 0), t, np.inf)


_BOX_COLORS = np.array([[0.75, 0.45, 0.35], [0.55, 0.6, 0.75], [0.8, 0.75, 0.55], [0.5, 0.7, 0.5],
                        [0.7, 0.5, 0.7], [0.6, 0.6, 0.6]])
_POLE_COLORS = np.array([[0.9, 0.9, 0.2], [0.2, 0.3, 0.9], [0.9, 0.3, 0.2]])


class SyntheticScene:
    """Ray-cast oracle over a fixed set of primitives."""

    def __init__(self, spec: SceneSpec, boxes, cylinders):
        self.spec = spec
        self.boxes = tuple(boxes)
        self.cylinders = tuple(cylinders)

    def cast(self, pose: Pose, intr: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel (depth, primitive id); primitive id -1 marks misses."""
        o = pose.translation
        d = _pixel_rays(intr, pose)
        hits = []
        if self.spec.ground:
            hits.append(_hit_ground(o, d))
        else:
            hits.append(np.full(len(d), np.inf))
        hits += [_hit_box(o, d, b) for b in self.boxes]
        hits += [_hit_cylinder(o, d, c) for c in self.cylinders]
        hits = np.stack(hits)
        prim = np.argmin(hits, axis=0)
        t = hits[prim, np.arange(len(d))]
        miss = ~np.isfinite(t) | (t > self.spec.max_range)
        t = np.where(miss, 0.0, t)
        prim = np.where(miss, -1, prim)
        return t.reshape(intr.shape), prim.reshape(intr.shape)

    def depth(self, pose: Pose, intr: Optional[CameraIntrinsics] = None) -> np.ndarray:
        """Exact dense depth for any pose (the oracle)."""
        return self.cast(pose, intr or self.spec.intrinsics)[0]

    def render(self, pose: Pose, intr: Optional[CameraIntrinsics] = None) -> tuple[np.ndarray, np.ndarray]:
        intr = intr or self.spec.intrinsics
        t, prim = self.cast(pose, intr)
        pts = pose.translation + _pixel_rays(intr, pose).reshape(intr.height, intr.width, 3) * t[..., None]
        return self._albedo(pts, prim), t

    def _albedo(self, pts: np.ndarray, prim: np.ndarray) -> np.ndarray:
        rgb = np.zeros(prim.shape + (3,))
        x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
        ground = prim == GROUND_ID
        checker = (np.floor(x) + np.floor(y)) % 2
        tone = 0.35 + 0.15 * checker + 0.05 * np.sin(0.7 * x) * np.cos(0.9 * y)
        rgb[ground] = np.stack([tone, tone, tone * 1.05], axis=-1)[ground]
        nb = len(self.boxes)
        for k in range(nb):
            sel = prim == 1 + k
            stripes = 0.85 + 0.15 * ((np.floor(z * 1.5) % 2))
            rgb[sel] = _BOX_COLORS[k % len(_BOX_COLORS)] * stripes[sel][:, None]
        for k in range(len(self.cylinders)):
            sel = prim == 1 + nb + k
            band = 0.8 + 0.2 * (np.floor(z * 2) % 2)
            rgb[sel] = _POLE_COLORS[k % len(_POLE_COLORS)] * band[sel][:, None]
        return np.clip(rgb, 0.0, 1.0)


def sparsify(depth: np.ndarray, spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    out = depth.copy()
    if spec.lidar_row_stride > 1:
        keep = np.zeros(depth.shape[0], dtype=bool)
        keep[::spec.lidar_row_stride] = True
        out[~keep] = 0.0
    if spec.dropout > 0:
        out[rng.random(depth.shape) < spec.dropout] = 0.0
    return out


def generate_synthetic_scene(spec: SceneSpec = SceneSpec(), seed: int = 0) -> tuple[list[Frame], SyntheticScene]:
    """Frames along the spec trajectory plus the scene that serves as their oracle."""
    if spec.camera_height <= 0:
        raise InputError("camera must be above the ground plane")
    if spec.n_frames < 1:
        raise InputError("need at least one frame")
    rng = np.random.default_rng(seed)
    boxes, cylinders = spec.boxes, spec.cylinders
    if boxes is None or cylinders is None:
        rb, rc = _random_layout(spec, rng)
        boxes = rb if boxes is None else boxes
        cylinders = rc if cylinders is None else cylinders
    boxes = tuple(b if isinstance(b, Box) else Box(tuple(b[0]), tuple(b[1])) for b in boxes)
    cylinders = tuple(c if isinstance(c, Cylinder) else Cylinder(*c) for c in cylinders)
    if not spec.ground and not boxes and not cylinders:
        raise InputError("scene has zero primitives")
    scene = SyntheticScene(spec, boxes, cylinders)
    intr = spec.intrinsics
    frames = []
    for i, pose in enumerate(trajectory_poses(spec)):
        rgb, depth = scene.render(pose, intr)
        frames.append(Frame(f"{i:06d}", rgb, sparsify(depth, spec, rng), pose, intr))
    return frames, scene
