from .camera import (
    CameraIntrinsics,
    PointCloud,
    fill_gaps,
    occupancy_mask,
    project,
    project_points,
    unproject,
    valid_mask,
)
from .pose import Pose, axis_rotation, interpolate_pose, rotation_angle
from .strategies import KINDS, Provenance, StrategySpec, expected_count, synthesize_poses

__all__ = [
    "CameraIntrinsics",
    "KINDS",
    "PointCloud",
    "Pose",
    "Provenance",
    "StrategySpec",
    "axis_rotation",
    "fill_gaps",
    "expected_count",
    "interpolate_pose",
    "occupancy_mask",
    "project",
    "project_points",
    "rotation_angle",
    "synthesize_poses",
    "unproject",
    "valid_mask",
]
