"""Frames, sub-scenes and the distance-from-anchor splitting rule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InputError
from ..geometry import CameraIntrinsics, Pose

DEFAULT_MAX_EXTENT = 50.0
DEFAULT_HOLDOUT_FRACTION = 0.10


@dataclass(frozen=True, eq=False)
class Frame:
    frame_id: str
    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) meters, 0 = invalid
    pose: Pose
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        if self.depth.shape != self.intrinsics.shape:
            raise InputError(f"frame {self.frame_id}: depth {self.depth.shape} vs intrinsics {self.intrinsics.shape}")
        if self.rgb.shape[:2] != self.depth.shape:
            raise InputError(f"frame {self.frame_id}: rgb and depth dimensions disagree")


def holdout_count(n: int, fraction: float) -> int:
    """Number of holdout frames: ``fraction * n`` rounded half-up, at least one when n >= 2."""
    if n < 2 or fraction <= 0:
        return 0
    m = int(math.floor(n * fraction + 0.5))
    return min(max(m, 1), n - 1)


def holdout_indices(n: int, fraction: float = DEFAULT_HOLDOUT_FRACTION) -> list[int]:
    """Evenly spaced holdout positions, one at the middle of each stride."""
    m = holdout_count(n, fraction)
    return [int(math.floor((j + 0.5) * n / m)) for j in range(m)]


@dataclass(frozen=True, eq=False)
class SubScene:
    scene_id: str
    index: int
    frames: tuple
    holdout: tuple  # positions into ``frames``
    max_extent: float = DEFAULT_MAX_EXTENT
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION

    @property
    def subscene_id(self) -> str:
        return f"{self.scene_id}/sub{self.index:03d}"

    @property
    def anchor(self) -> Pose:
        return self.frames[0].pose

    @property
    def train_frames(self) -> list[Frame]:
        held = set(self.holdout)
        return [f for i, f in enumerate(self.frames) if i not in held]

    @property
    def holdout_frames(self) -> list[Frame]:
        return [self.frames[i] for i in self.holdout]

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return self.frames[0].intrinsics


def make_subscene(scene_id: str, index: int, frames: Sequence[Frame], max_extent: float = DEFAULT_MAX_EXTENT,
                  holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION) -> SubScene:
    frames = tuple(frames)
    return SubScene(scene_id, index, frames, tuple(holdout_indices(len(frames), holdout_fraction)),
                    max_extent, holdout_fraction)


def split_positions(translations: np.ndarray, max_extent: float = DEFAULT_MAX_EXTENT) -> list[list[int]]:
    """Greedy left-to-right grouping of positions by distance to the group's first element."""
    translations = np.asarray(translations, dtype=np.float64).reshape(-1, 3)
    groups: list[list[int]] = []
    anchor = None
    for i, t in enumerate(translations):
        if anchor is None or np.linalg.norm(t - anchor) > max_extent:
            groups.append([])
            anchor = t
        groups[-1].append(i)
    return groups


def split_scene(frames: Sequence[Frame], max_extent: float = DEFAULT_MAX_EXTENT, scene_id: str = "scene",
                holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION) -> list[SubScene]:
    frames = list(frames)
    if not frames:
        raise InputError("cannot split an empty frame list")
    if not max_extent > 0:
        raise InputError("max_extent must be positive")
    if not 0 <= holdout_fraction < 1:
        raise InputError("holdout_fraction must lie in [0, 1)")
    ids = [f.frame_id for f in frames]
    if len(set(ids)) != len(ids):
        raise InputError("frame ids must be unique within a scene")
    groups = split_positions(np.array([f.pose.translation for f in frames]), max_extent)
    return [
        make_subscene(scene_id, k, [frames[i] for i in g], max_extent, holdout_fraction)
        for k, g in enumerate(groups)
    ]
