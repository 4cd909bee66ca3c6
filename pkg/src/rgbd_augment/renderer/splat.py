"""Deterministic point-splat renderer.

All training frames of a sub-scene are lifted into one colored cloud and
forward-splatted into the target view.  Per pixel the visible surface is
resolved with a slack-aware z-buffer:

* every point carries a depth slack, the depth change to its nearest valid
  neighbour in the source map along each image axis (how far the same
  surface can drift in depth across one pixel);
* a point is on the front surface of a pixel when ``z - slack`` does not
  exceed the smallest ``z + slack`` seen there (plus ``zbuffer_eps``);
* among front-surface points the one projecting closest to the pixel center
  wins and supplies the color;
* the pixel depth is where the pixel-center ray meets the winner's tangent
  plane (normal estimated from source-map neighbours), falling back to the
  winner's own depth when no plane is available or the hit lands further
  than half the local point spacing from the winner.

A point from a source camera whose optical center coincides with the
target's, landing on a pixel center, is the first hit along that pixel's ray
and takes precedence over everything else.  This makes renders at training
poses reproduce the source depth exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import InputError, UnusableSubsceneError
from ..geometry import CameraIntrinsics, PointCloud, Pose, Provenance, occupancy_mask, project_points, unproject
from ..geometry.camera import fill_gaps, valid_mask


CENTER_TOL = 1e-9  # meters
EXACT_PX = 1e-6  # pixels


@dataclass(frozen=True)
class SplatParams:
    radius: int = 1
    zbuffer_eps: float = 1e-4

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 0:
            raise InputError("splat radius must be a non-negative integer")
        if self.zbuffer_eps < 0:
            raise InputError("zbuffer_eps must be non-negative")


@dataclass(frozen=True, eq=False)
class RenderedView:
    rgb: np.ndarray
    depth: np.ndarray
    mask: np.ndarray
    subscene_id: str = ""
    pose: Optional[Pose] = None
    provenance: Optional[Provenance] = None


def depth_slack(depth: np.ndarray) -> np.ndarray:
    """Per-pixel one-pixel depth variation, smallest over neighbours per axis, largest over axes."""
    valid = valid_mask(depth)
    d = np.where(valid, depth, np.nan)
    slack = np.zeros(depth.shape)
    for axis in (0, 1):
        fwd = np.full(depth.shape, np.nan)
        bwd = np.full(depth.shape, np.nan)
        diff = np.abs(np.diff(d, axis=axis))
        if axis == 0:
            fwd[:-1] = diff
            bwd[1:] = diff
        else:
            fwd[:, :-1] = diff
            bwd[:, 1:] = diff
        per_axis = np.fmin(fwd, bwd)
        slack = np.fmax(slack, np.nan_to_num(per_axis, nan=0.0))
    return np.where(valid, slack, 0.0)


def _camera_points(depth: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    v, u = np.mgrid[0:intr.height, 0:intr.width]
    return np.stack([(u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth], axis=-1)


def surfels(depth: np.ndarray, intr: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Camera-frame unit normals and sample spacing from neighbouring pixels.

    Along each axis the neighbour with the smaller depth jump is used, so
    surfels at silhouettes come from the surface the pixel belongs to.
    Normals are NaN where undefined; spacing is the longer of the two
    neighbour offsets (NaN when either is missing).
    """
    valid = valid_mask(depth)
    P = np.where(valid[..., None], _camera_points(depth, intr), np.nan)
    tangents = []
    for axis in (1, 0):
        fwd = np.full(P.shape, np.nan)
        bwd = np.full(P.shape, np.nan)
        diff = np.diff(P, axis=axis)
        if axis == 0:
            fwd[:-1] = diff
            bwd[1:] = diff
        else:
            fwd[:, :-1] = diff
            bwd[:, 1:] = diff
        jf = np.abs(fwd[..., 2])
        jb = np.abs(bwd[..., 2])
        use_b = np.isnan(jf) | (jb < jf)
        tangents.append(np.where(use_b[..., None], bwd, fwd))
    n = np.cross(tangents[0], tangents[1])
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / norm
    n[~(norm[..., 0] > 0)] = np.nan
    spacing = np.maximum(np.linalg.norm(tangents[0], axis=-1), np.linalg.norm(tangents[1], axis=-1))
    return n, spacing


@dataclass(frozen=True, eq=False)
class SplatCloud:
    """Colored cloud plus per-point depth slack, world-frame normal and spacing."""

    cloud: PointCloud
    slack: np.ndarray
    normals: np.ndarray
    spacing: np.ndarray
    source: np.ndarray  # frame index per point
    centers: np.ndarray  # (n_frames, 3) source camera centers

    @classmethod
    def from_frames(cls, frames) -> "SplatCloud":
        clouds, slacks, normals, spacings, sources = [], [], [], [], []
        for k, f in enumerate(frames):
            valid = valid_mask(f.depth)
            clouds.append(unproject(f.depth, f.intrinsics, f.pose, f.rgb))
            slacks.append(depth_slack(f.depth)[valid])
            n, sp = surfels(f.depth, f.intrinsics)
            normals.append(n[valid] @ f.pose.rotation.T)
            spacings.append(sp[valid])
            sources.append(np.full(int(valid.sum()), k))
        centers = np.array([f.pose.translation for f in frames]).reshape(-1, 3)
        if not clouds:
            return cls(PointCloud(np.zeros((0, 3)), np.zeros((0, 3))), np.zeros(0), np.zeros((0, 3)), np.zeros(0),
                       np.zeros(0, dtype=np.int64), centers)
        return cls(PointCloud.concat(clouds), np.concatenate(slacks), np.concatenate(normals),
                   np.concatenate(spacings), np.concatenate(sources), centers)


def splat(sc: SplatCloud, intr: CameraIntrinsics, pose: Pose, params: SplatParams = SplatParams()):
    """Return (rgb, depth, mask) for the target view."""
    h, w = intr.shape
    proj = project_points(sc.cloud.points, intr, pose)
    r = int(params.radius)
    pix, z, slack, dist, idx, spill = [], [], [], [], [], []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            u = proj.u + dx
            v = proj.v + dy
            ok = (u >= 0) & (u < w) & (v >= 0) & (v < h)
            pix.append((v * w + u)[ok])
            z.append(proj.z[ok])
            slack.append(sc.slack[proj.index[ok]])
            dist.append(np.hypot(proj.du[ok] - dx, proj.dv[ok] - dy))
            idx.append(proj.index[ok])
            spill.append(np.full(int(ok.sum()), dx != 0 or dy != 0))
    pix = np.concatenate(pix)
    z = np.concatenate(z)
    slack = np.concatenate(slack)
    dist = np.concatenate(dist)
    idx = np.concatenate(idx)
    spill = np.concatenate(spill)

    # footprint entries only fill enclosed gaps that no point lands in directly
    direct = np.zeros(h * w, dtype=bool)
    direct[pix[~spill]] = True
    fillable = fill_gaps(direct.reshape(h, w), r).reshape(-1) & ~direct
    keep = ~spill | fillable[pix]
    pix, z, slack, dist, idx = pix[keep], z[keep], slack[keep], dist[keep], idx[keep]

    t, covers = _surfel_hits(sc, intr, pose, pix, idx)

    # front surface from points that actually cover their pixel center
    ref = np.where(covers, z + slack, np.inf)
    front = np.full(h * w, np.inf)
    np.minimum.at(front, pix, ref)
    fallback = np.full(h * w, np.inf)
    np.minimum.at(fallback, pix, z + slack)
    front = np.where(np.isinf(front), fallback, front)
    behind = (z - slack) > front[pix] + params.zbuffer_eps

    same_center = np.linalg.norm(sc.centers - pose.translation, axis=1) <= CENTER_TOL
    exact = same_center[sc.source[idx]] & (dist <= EXACT_PX)

    order = np.lexsort((idx, z, dist, behind, ~covers, ~exact, pix))
    first = np.ones(len(order), dtype=bool)
    first[1:] = pix[order][1:] != pix[order][:-1]
    win = order[first]

    depth = np.zeros(h * w)
    depth[pix[win]] = np.where(np.isnan(t[win]), z[win], t[win])
    rgb = np.zeros((h * w, 3))
    if sc.cloud.colors is not None:
        rgb[pix[win]] = sc.cloud.colors[idx[win]]
    mask = occupancy_mask(sc.cloud, intr, pose, radius=r)
    return rgb.reshape(h, w, 3), depth.reshape(h, w), mask


def _surfel_hits(sc: SplatCloud, intr: CameraIntrinsics, pose: Pose, pix, idx):
    """Intersect each pixel-center ray with the candidate point's tangent plane.

    Returns the hit depth (NaN when the point has no usable plane) and
    whether the point covers the pixel center: the hit must lie within the
    point's sample spacing.  Points without a plane are assumed to cover.
    """
    u = pix % intr.width
    v = pix // intr.width
    ray = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones(len(pix))], axis=1)
    p = pose.to_camera(sc.cloud.points[idx])
    n = sc.normals[idx] @ pose.rotation
    spacing = sc.spacing[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("ij,ij->i", n, p) / np.einsum("ij,ij->i", n, ray)
        hit = ray * t[:, None]
        local = np.linalg.norm(hit - p, axis=1) <= 0.5 * spacing
        usable = np.isfinite(t) & (t > 0)
    has_plane = np.all(np.isfinite(n), axis=1) & np.isfinite(spacing)
    covers = ~has_plane | (usable & local)
    return np.where(has_plane & usable & local, t, np.nan), covers


def render_splat(subscene, pose: Pose, intr: Optional[CameraIntrinsics] = None, params: SplatParams = SplatParams(),
                 provenance: Optional[Provenance] = None, cloud: Optional[SplatCloud] = None) -> RenderedView:
    """Render one view of a sub-scene from its training split.

    ``cloud`` may be passed to reuse the lifted training cloud across poses.
    """
    train = subscene.train_frames
    if not train:
        raise UnusableSubsceneError(f"sub-scene {subscene.subscene_id} has an empty training split")
    intr = intr or subscene.intrinsics
    if cloud is None:
        cloud = SplatCloud.from_frames(train)
    rgb, depth, mask = splat(cloud, intr, pose, params)
    return RenderedView(rgb, depth, mask, subscene.subscene_id, pose, provenance)
