from .codec import (
    load_depth,
    load_mask,
    load_rgb,
    quantize_depth,
    read_depth_png,
    read_mask_png,
    read_rgb_png,
    write_depth_png,
    write_mask_png,
    write_rgb_png,
)
from .manifest import (
    ORIGINAL,
    DatasetManifest,
    Record,
    merge_datasets,
    read_calib,
    read_frames,
    read_poses,
    resolve_cap,
    write_calib,
    write_frames,
    write_poses,
)
from .scene import Frame, SubScene, holdout_count, holdout_indices, make_subscene, split_scene
from .synthetic import Box, Cylinder, SceneSpec, SyntheticScene, generate_synthetic_scene

__all__ = [
    "Box",
    "Cylinder",
    "DatasetManifest",
    "Frame",
    "ORIGINAL",
    "Record",
    "SceneSpec",
    "SubScene",
    "SyntheticScene",
    "generate_synthetic_scene",
    "holdout_count",
    "holdout_indices",
    "load_depth",
    "load_mask",
    "load_rgb",
    "make_subscene",
    "merge_datasets",
    "quantize_depth",
    "read_calib",
    "read_depth_png",
    "read_frames",
    "read_mask_png",
    "read_poses",
    "read_rgb_png",
    "resolve_cap",
    "split_scene",
    "write_calib",
    "write_depth_png",
    "write_frames",
    "write_mask_png",
    "write_poses",
    "write_rgb_png",
]
