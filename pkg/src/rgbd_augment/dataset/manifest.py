"""Dataset manifests, directory layout I/O and seeded merging.

Layout of a scene (or sub-scene) directory::

    <dir>/rgb/<frame_id>.png     8-bit RGB
    <dir>/depth/<frame_id>.png   16-bit depth, value / 256 = meters, 0 invalid
    <dir>/mask/<frame_id>.png    optional 8-bit occupancy mask
    <dir>/poses.txt              one row-major 3x4 camera-to-world matrix per line
    <dir>/calib.txt              fx fy cx cy U V

Manifests are JSON; file paths inside are relative to the manifest's folder.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import FormatError, InputError, ValidationError
from ..geometry import CameraIntrinsics, Pose
from .codec import load_depth, load_rgb, save_bytes, write_depth_png, write_mask_png, write_rgb_png
from .scene import Frame

ORIGINAL = "original"


# ---------------------------------------------------------------- layout I/O

def format_pose_line(pose: Pose) -> str:
    return " ".join(repr(x) for x in pose.as_rows())


def write_poses(path, poses: Sequence[Pose]) -> None:
    with open(path, "w") as f:
        for p in poses:
            f.write(format_pose_line(p) + "\n")


def read_poses(path) -> list[Pose]:
    poses = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != 12:
                raise FormatError(f"{path}:{lineno}: expected 12 values, got {len(vals)}")
            poses.append(Pose.from_matrix(np.array([float(v) for v in vals])))
    return poses


def write_calib(path, intr: CameraIntrinsics) -> None:
    with open(path, "w") as f:
        f.write(" ".join(repr(x) for x in intr.as_list()) + "\n")


def read_calib(path) -> CameraIntrinsics:
    with open(path) as f:
        vals = f.read().split()
    if len(vals) != 6:
        raise FormatError(f"{path}: expected 'fx fy cx cy U V'")
    return CameraIntrinsics.from_list(vals)


def write_frames(directory, frames: Sequence[Frame], masks: Optional[Sequence[np.ndarray]] = None) -> None:
    """Write frames in the standard layout (rgb/, depth/, poses.txt, calib.txt)."""
    directory = Path(directory)
    for i, fr in enumerate(frames):
        save_bytes(directory / "rgb" / f"{fr.frame_id}.png", write_rgb_png(fr.rgb))
        save_bytes(directory / "depth" / f"{fr.frame_id}.png", write_depth_png(fr.depth))
        if masks is not None:
            save_bytes(directory / "mask" / f"{fr.frame_id}.png", write_mask_png(masks[i]))
    directory.mkdir(parents=True, exist_ok=True)
    write_poses(directory / "poses.txt", [f.pose for f in frames])
    if frames:
        write_calib(directory / "calib.txt", frames[0].intrinsics)


def read_frames(directory) -> list[Frame]:
    """Read a directory in the standard layout; frame order follows sorted ids."""
    directory = Path(directory)
    missing = [n for n in ("rgb", "depth", "poses.txt", "calib.txt") if not (directory / n).exists()]
    if missing:
        raise InputError(f"{directory}: missing {', '.join(missing)}")
    intr = read_calib(directory / "calib.txt")
    poses = read_poses(directory / "poses.txt")
    ids = sorted(p.stem for p in (directory / "depth").glob("*.png"))
    if len(ids) != len(poses):
        raise FormatError(f"{directory}: {len(ids)} depth maps but {len(poses)} poses")
    frames = []
    for fid, pose in zip(ids, poses):
        rgb_path = directory / "rgb" / f"{fid}.png"
        if not rgb_path.exists():
            raise InputError(f"{directory}: no rgb image for frame {fid}")
        frames.append(Frame(fid, load_rgb(rgb_path), load_depth(directory / "depth" / f"{fid}.png"), pose, intr))
    return frames


# ---------------------------------------------------------------- manifests

@dataclass(frozen=True)
class Record:
    frame_id: str
    rgb: str  # absolute in memory, relative on disk
    depth: str
    pose: tuple  # row-major 3x4
    intrinsics_id: str
    origin: str = ORIGINAL
    subscene: str = ""
    source_frame: str = ""
    parameter: str = ""
    mask: Optional[str] = None

    @property
    def key(self) -> tuple:
        return (self.origin, self.source_frame, self.parameter)

    def to_json(self, base: Path) -> dict:
        d = asdict(self)
        d["pose"] = list(self.pose)
        for k in ("rgb", "depth", "mask"):
            if d[k] is not None:
                d[k] = os.path.relpath(d[k], base).replace(os.sep, "/")
        return d

    @classmethod
    def from_json(cls, d: dict, base: Path) -> "Record":
        d = dict(d)
        for k in ("rgb", "depth", "mask"):
            if d.get(k) is not None:
                d[k] = os.path.normpath(os.path.join(base, d[k]))
        d["pose"] = tuple(float(x) for x in d["pose"])
        return cls(**d)


@dataclass
class DatasetManifest:
    records: list = field(default_factory=list)
    intrinsics: dict = field(default_factory=dict)  # id -> [fx, fy, cx, cy, U, V]
    seed: Optional[int] = None

    def __len__(self):
        return len(self.records)

    def counts(self) -> dict:
        out: dict = {}
        for r in self.records:
            out[r.origin] = out.get(r.origin, 0) + 1
        return dict(sorted(out.items()))

    def validate(self, check_files: bool = True) -> None:
        problems = []
        seen = set()
        for r in self.records:
            if r.key in seen:
                problems.append(f"duplicate record {r.key}")
            seen.add(r.key)
            if r.intrinsics_id not in self.intrinsics:
                problems.append(f"{r.frame_id}: unknown intrinsics id {r.intrinsics_id!r}")
            if check_files:
                for p in (r.rgb, r.depth, r.mask):
                    if p is not None and not os.path.exists(p):
                        problems.append(f"{r.frame_id}: missing file {p}")
        if problems:
            raise ValidationError(f"manifest has {len(problems)} problem(s)", problems)

    def to_json(self, base) -> dict:
        base = Path(base)
        return {
            "seed": self.seed,
            "intrinsics": {k: list(v) for k, v in sorted(self.intrinsics.items())},
            "counts": self.counts(),
            "records": [r.to_json(base) for r in self.records],
        }

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.to_json(path.parent.resolve()), indent=1, sort_keys=True)
        path.write_text(text + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read manifest {path}: {e}") from e
        base = path.parent.resolve()
        return cls(
            records=[Record.from_json(r, base) for r in data["records"]],
            intrinsics={k: list(v) for k, v in data.get("intrinsics", {}).items()},
            seed=data.get("seed"),
        )


def resolve_cap(cap: Union[int, str], n_original: int) -> int:
    """Turn a cap given as a count or as ``"<p>%"`` of the original size into a count."""
    if isinstance(cap, str):
        text = cap.strip()
        if text.endswith("%"):
            pct = float(text[:-1])
            if pct < 0:
                raise InputError("cap must be non-negative")
            return int(math.floor(n_original * pct / 100.0 + 0.5))
        cap = int(text)
    if cap < 0:
        raise InputError("cap must be non-negative")
    return int(cap)


def merge_datasets(original: DatasetManifest, pool: DatasetManifest, cap: Union[int, str, None],
                   seed: int) -> DatasetManifest:
    """Original records followed by a seeded uniform subset of ``min(cap, |pool|)`` pool records."""
    n = len(pool.records) if cap is None else min(resolve_cap(cap, len(original)), len(pool.records))
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(pool.records), size=n, replace=False)) if n else np.zeros(0, dtype=int)
    intrinsics = dict(original.intrinsics)
    for k, v in pool.intrinsics.items():
        if k in intrinsics and list(intrinsics[k]) != list(v):
            raise InputError(f"intrinsics id {k!r} differs between manifests")
        intrinsics[k] = v
    return DatasetManifest(
        records=list(original.records) + [pool.records[i] for i in picked],
        intrinsics=intrinsics,
        seed=seed,
    )
