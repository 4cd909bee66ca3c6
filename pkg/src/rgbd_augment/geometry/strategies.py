"""Novel-pose synthesis strategies.

Every strategy maps an ordered trajectory to a list of ``(Pose, Provenance)``
pairs.  Output counts for ``n`` input poses:

===================  =================
reconstruction       n
interpolation        (n - 1) * interp_count
angled               2n
translate-*          2n
random-perturb       n
===================  =================
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InputError
from .pose import Pose, axis_rotation, interpolate_pose

KINDS = (
    "reconstruction",
    "interpolation",
    "angled",
    "translate-horizontal",
    "translate-vertical",
    "random-perturb",
)


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    angle_deg: float = 3.0
    translate_m: float = 0.30
    interp_count: int = 1
    frame: str = "camera"  # axes for translate-*: "camera" or "world"
    perturb_translate_m: tuple = (0.30, 0.30, 0.30)
    perturb_rotate_deg: tuple = (3.0, 3.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown strategy {self.kind!r}; expected one of {KINDS}")
        if not self.angle_deg > 0:
            raise InputError("angle_deg must be positive")
        if not self.translate_m > 0:
            raise InputError("translate_m must be positive")
        if int(self.interp_count) != self.interp_count or self.interp_count < 1:
            raise InputError("interp_count must be an integer >= 1")
        if self.frame not in ("camera", "world"):
            raise InputError("frame must be 'camera' or 'world'")
        object.__setattr__(self, "perturb_translate_m", tuple(float(x) for x in self.perturb_translate_m))
        object.__setattr__(self, "perturb_rotate_deg", tuple(float(x) for x in self.perturb_rotate_deg))
        if len(self.perturb_translate_m) != 3 or len(self.perturb_rotate_deg) != 3:
            raise InputError("perturbation ranges need one value per axis")
        if any(x < 0 for x in self.perturb_translate_m + self.perturb_rotate_deg):
            raise InputError("perturbation ranges must be non-negative")

    @property
    def tag(self) -> str:
        return self.kind

    def to_dict(self) -> dict:
        d = asdict(self)
        d["perturb_translate_m"] = list(self.perturb_translate_m)
        d["perturb_rotate_deg"] = list(self.perturb_rotate_deg)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StrategySpec":
        return cls(**d)


@dataclass(frozen=True)
class Provenance:
    source_index: int
    strategy: str
    parameter: str

    def to_dict(self) -> dict:
        return {"source_index": self.source_index, "strategy": self.strategy, "parameter": self.parameter}


def expected_count(n: int, spec: StrategySpec) -> int:
    if spec.kind == "reconstruction" or spec.kind == "random-perturb":
        return n
    if spec.kind == "interpolation":
        return max(n - 1, 0) * spec.interp_count
    return 2 * n


def _yaw(pose: Pose, angle_deg: float) -> Pose:
    # positive angle turns the camera left: rotation about camera up (-y)
    return Pose(pose.rotation @ axis_rotation("y", -np.radians(angle_deg)), pose.translation)


def _shift(pose: Pose, axis: int, amount: float, frame: str) -> Pose:
    offset = np.zeros(3)
    offset[axis] = amount
    if frame == "camera":
        offset = pose.rotation @ offset
    return Pose(pose.rotation, pose.translation + offset)


def _fmt(x: float) -> str:
    return f"{x:+g}"


def synthesize_poses(poses: Sequence[Pose], spec: StrategySpec) -> list[tuple[Pose, Provenance]]:
    poses = list(poses)
    if not poses:
        raise InputError("cannot synthesize poses from an empty trajectory")
    kind = spec.kind
    out: list[tuple[Pose, Provenance]] = []

    if kind == "reconstruction":
        out = [(p, Provenance(i, kind, "exact")) for i, p in enumerate(poses)]

    elif kind == "interpolation":
        k = spec.interp_count
        for i in range(len(poses) - 1):
            for j in range(1, k + 1):
                s = j / (k + 1)
                out.append((interpolate_pose(poses[i], poses[i + 1], s), Provenance(i, kind, f"s={j}/{k + 1}")))

    elif kind == "angled":
        for i, p in enumerate(poses):
            for sign in (1.0, -1.0):
                out.append((_yaw(p, sign * spec.angle_deg), Provenance(i, kind, f"yaw{_fmt(sign * spec.angle_deg)}deg")))

    elif kind in ("translate-horizontal", "translate-vertical"):
        axis = 0 if kind == "translate-horizontal" else 1
        for i, p in enumerate(poses):
            for sign in (1.0, -1.0):
                amount = sign * spec.translate_m
                out.append((_shift(p, axis, amount, spec.frame), Provenance(i, kind, f"{spec.frame}{_fmt(amount)}m")))

    elif kind == "random-perturb":
        rng = np.random.default_rng(spec.seed)
        trange = np.asarray(spec.perturb_translate_m)
        rrange = np.radians(np.asarray(spec.perturb_rotate_deg))
        for i, p in enumerate(poses):
            dt = rng.uniform(-1.0, 1.0, 3) * trange
            dr = rng.uniform(-1.0, 1.0, 3) * rrange
            local = axis_rotation("x", dr[0]) @ axis_rotation("y", dr[1]) @ axis_rotation("z", dr[2])
            novel = Pose(p.rotation @ local, p.translation + p.rotation @ dt)
            param = "t=" + ",".join(f"{x:.6f}" for x in dt) + ";r=" + ",".join(f"{np.degrees(x):.6f}" for x in dr)
            out.append((novel, Provenance(i, kind, param)))

    return out
