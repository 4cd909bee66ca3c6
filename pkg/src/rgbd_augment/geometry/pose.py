"""Rigid camera-to-world transforms and their interpolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import InputError

ORTHO_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pose:
    """Camera-to-world rigid transform ``x_world = R @ x_cam + t``.

    Camera frame follows the usual vision convention: x right, y down,
    z forward along the optical axis.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen(self.rotation)
        t = _frozen(self.translation).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise InputError(f"pose needs 3x3 rotation and 3-vector, got {R.shape} / {t.shape}")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise InputError("pose contains non-finite values")
        if np.max(np.abs(R @ R.T - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise InputError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        """Build from a 3x4 or 4x4 camera-to-world matrix."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape == (12,):
            m = m.reshape(3, 4)
        if m.shape not in ((3, 4), (4, 4)):
            raise InputError(f"expected 3x4 or 4x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def as_rows(self) -> list[float]:
        """Row-major 3x4 as a flat list (the poses.txt convention)."""
        return [float(x) for x in self.as_matrix()[:3].reshape(-1)]

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map Nx3 points from this pose's source frame into its target frame."""
        return points @ self.rotation.T + self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """Map Nx3 world points into this camera's frame."""
        return (points - self.translation) @ self.rotation

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation))

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))


def rotation_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle in radians between two rotation matrices."""
    return float(np.linalg.norm(Rotation.from_matrix(a.T @ b).as_rotvec()))


def axis_rotation(axis: str, angle_rad: float) -> np.ndarray:
    """Right-handed rotation about a coordinate axis ('x', 'y' or 'z')."""
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    if axis == "z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    raise InputError(f"unknown axis {axis!r}")


def interpolate_pose(a: Pose, b: Pose, s: float) -> Pose:
    """Slerp the rotations along the shorter arc and lerp the translations."""
    if not 0.0 <= s <= 1.0:
        raise InputError(f"interpolation parameter must lie in [0, 1], got {s}")
    if s == 0.0:
        return a
    if s == 1.0:
        return b
    rel = Rotation.from_matrix(a.rotation.T @ b.rotation).as_rotvec()
    R = a.rotation @ Rotation.from_rotvec(s * rel).as_matrix()
    t = (1.0 - s) * a.translation + s * b.translation
    return Pose(R, t)
