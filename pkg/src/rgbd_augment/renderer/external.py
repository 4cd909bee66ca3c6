"""File-exchange contract for plugging in an external (e.g. neural) renderer.

The request side writes::

    <exchange_dir>/request.json
    <exchange_dir>/subscene/{rgb,depth}/<frame_id>.png, poses.txt, calib.txt

``request.json`` lists the target poses (row-major 3x4 camera-to-world) with
their index.  The external tool answers with::

    <exchange_dir>/<pose_index>/rgb.png     8-bit RGB
    <exchange_dir>/<pose_index>/depth.png   16-bit depth, value / 256 = meters

Occupancy masks are computed here from the sub-scene's training cloud; depth
and color outside the mask are cleared.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..dataset.codec import load_bytes, read_depth_png, read_rgb_png, save_bytes, write_depth_png, write_rgb_png
from ..dataset.manifest import write_frames
from ..errors import AugmentError, UnusableSubsceneError
from ..geometry import Pose, Provenance, occupancy_mask
from .splat import RenderedView, SplatCloud

REQUEST_NAME = "request.json"
PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class ExternalResult:
    index: int
    view: Optional[RenderedView] = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.view is not None


def write_request(subscene, poses: Sequence, exchange_dir) -> Path:
    """Write the sub-scene training data and target poses; returns the request path."""
    exchange_dir = Path(exchange_dir)
    exchange_dir.mkdir(parents=True, exist_ok=True)
    write_frames(exchange_dir / "subscene", subscene.train_frames)
    entries = []
    for i, item in enumerate(poses):
        pose, prov = item if isinstance(item, tuple) else (item, None)
        entries.append({"index": i, "pose": pose.as_rows(), "provenance": prov.to_dict() if prov else None})
    request = {
        "version": PROTOCOL_VERSION,
        "subscene": subscene.subscene_id,
        "data_dir": "subscene",
        "intrinsics": subscene.intrinsics.as_list(),
        "poses": entries,
        "response": "<index>/rgb.png, <index>/depth.png",
    }
    path = exchange_dir / REQUEST_NAME
    path.write_text(json.dumps(request, indent=1, sort_keys=True) + "\n")
    return path


def write_responses(exchange_dir, views: Sequence[RenderedView]) -> None:
    """Lay out views as an external renderer would answer a request."""
    for i, v in enumerate(views):
        save_bytes(Path(exchange_dir) / str(i) / "rgb.png", write_rgb_png(v.rgb))
        save_bytes(Path(exchange_dir) / str(i) / "depth.png", write_depth_png(v.depth))


def _ingest_one(directory: Path, intr, cloud: SplatCloud, pose: Pose, mask_radius: int) -> RenderedView:
    rgb_path, depth_path = directory / "rgb.png", directory / "depth.png"
    missing = [p.name for p in (rgb_path, depth_path) if not p.exists()]
    if missing:
        raise AugmentError(f"missing {', '.join(missing)}")
    rgb = read_rgb_png(load_bytes(rgb_path))
    depth = read_depth_png(load_bytes(depth_path))
    if depth.shape != intr.shape or rgb.shape[:2] != intr.shape:
        raise AugmentError(f"dimensions rgb {rgb.shape[:2]} / depth {depth.shape} do not match {intr.shape}")
    mask = occupancy_mask(cloud.cloud, intr, pose, radius=mask_radius)
    depth = np.where(mask, depth, 0.0)
    rgb = np.where(mask[..., None], rgb, 0.0)
    return RenderedView(rgb, depth, mask)


def render_external(subscene, poses: Sequence, exchange_dir, timeout: float = 0.0, poll: float = 0.5,
                    mask_radius: int = 0) -> list[ExternalResult]:
    """Request renders from an external tool and ingest whatever it produced.

    Waits up to ``timeout`` seconds for every response directory to appear.
    Problems are reported per pose; the batch never aborts on one bad pose.
    """
    train = subscene.train_frames
    if not train:
        raise UnusableSubsceneError(f"sub-scene {subscene.subscene_id} has an empty training split")
    exchange_dir = Path(exchange_dir)
    items = [p if isinstance(p, tuple) else (p, None) for p in poses]
    write_request(subscene, items, exchange_dir)

    deadline = time.monotonic() + timeout
    while True:
        ready = all((exchange_dir / str(i) / "depth.png").exists() for i in range(len(items)))
        if ready or time.monotonic() >= deadline:
            break
        time.sleep(poll)

    cloud = SplatCloud.from_frames(train)
    intr = subscene.intrinsics
    results = []
    for i, (pose, prov) in enumerate(items):
        try:
            v = _ingest_one(exchange_dir / str(i), intr, cloud, pose, mask_radius)
        except (AugmentError, OSError, ValueError) as e:
            results.append(ExternalResult(i, None, str(e)))
            continue
        results.append(ExternalResult(i, RenderedView(v.rgb, v.depth, v.mask, subscene.subscene_id, pose, prov)))
    return results
