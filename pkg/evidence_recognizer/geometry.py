from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from evidence_recognizer.exceptions import ConfigError, DegenerateFrameError, InvalidFrameError

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    Vec3 = npt.NDArray[np.float64]
    ArrayLike = Sequence[float] | npt.NDArray[np.float64]

FRAME_TOLERANCE = 1e-9
_MIN_FRAME_ANGLE = math.radians(1.0)


def as_vec3(value: ArrayLike) -> Vec3:
    return np.asarray(value, dtype=np.float64).reshape(3)


def as_tuple(value: ArrayLike) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(value, dtype=np.float64).ravel())


def _canonical_quat(quat: ArrayLike) -> tuple[float, float, float, float]:
    q = np.asarray(quat, dtype=np.float64)
    q = q / np.linalg.norm(q)
    if q[3] < 0:
        q = -q
    return (float(q[0]), float(q[1]), float(q[2]), float(q[3]))


@dataclass(frozen=True)
class Rotation:
    """A 3D rotation stored as a canonical unit quaternion (x, y, z, w) with w >= 0.

    The quaternion is the source of truth; `matrix` exposes the equivalent 3x3
    orthonormal matrix, which is what messages and persisted models carry.
    """

    quat: tuple[float, float, float, float]

    @classmethod
    def identity(cls) -> Rotation:
        return cls((0.0, 0.0, 0.0, 1.0))

    @classmethod
    def from_quat(cls, quat: ArrayLike) -> Rotation:
        return cls(_canonical_quat(quat))

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> Rotation:
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(_canonical_quat(_ScipyRotation.from_matrix(matrix).as_quat()))

    @classmethod
    def from_euler(cls, seq: str, angles: ArrayLike, degrees: bool = True) -> Rotation:
        return cls(_canonical_quat(_ScipyRotation.from_euler(seq, angles, degrees=degrees).as_quat()))

    @classmethod
    def from_rotvec(cls, rotvec: ArrayLike) -> Rotation:
        return cls(_canonical_quat(_ScipyRotation.from_rotvec(as_vec3(rotvec)).as_quat()))

    @classmethod
    def from_axis_angle(cls, axis: ArrayLike, angle: float) -> Rotation:
        axis = as_vec3(axis)
        return cls.from_rotvec(axis / np.linalg.norm(axis) * angle)

    @classmethod
    def random(cls, rng: np.random.Generator) -> Rotation:
        return cls(_canonical_quat(_ScipyRotation.random(random_state=rng).as_quat()))

    @cached_property
    def matrix(self) -> npt.NDArray[np.float64]:
        matrix = _ScipyRotation.from_quat(self.quat).as_matrix()
        matrix.setflags(write=False)
        return matrix

    def as_matrix(self) -> npt.NDArray[np.float64]:
        return self.matrix.copy()

    def apply(self, vector: ArrayLike) -> Vec3:
        return self.matrix @ as_vec3(vector)

    def inv(self) -> Rotation:
        x, y, z, w = self.quat
        return Rotation((-x, -y, -z, w))

    def compose(self, other: Rotation) -> Rotation:
        """Rotation applying `other` first, then `self`."""
        composed = _ScipyRotation.from_quat(self.quat) * _ScipyRotation.from_quat(other.quat)
        return Rotation(_canonical_quat(composed.as_quat()))

    def __matmul__(self, other: Rotation) -> Rotation:
        return self.compose(other)

    def angle_to(self, other: Rotation) -> float:
        """Geodesic distance in radians."""
        return float(rotation_distance(self.matrix, other.matrix))


def rotation_distance(a: npt.NDArray[np.float64], b: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Geodesic angle (radians) between stacks of rotation matrices, broadcasting over leading axes.

    Uses ||A - B||_F = 2 * sqrt(2) * sin(theta / 2), which stays accurate for small angles.
    """
    diff = np.linalg.norm(np.asarray(a) - np.asarray(b), axis=(-2, -1))
    return 2.0 * np.arcsin(np.clip(diff / (2.0 * math.sqrt(2.0)), 0.0, 1.0))


@dataclass(frozen=True)
class Pose:
    location: tuple[float, float, float]
    orientation: Rotation

    @classmethod
    def create(cls, location: ArrayLike, orientation: Rotation | None = None) -> Pose:
        return cls(as_tuple(location), orientation or Rotation.identity())

    @property
    def position(self) -> Vec3:
        return np.array(self.location, dtype=np.float64)

    @property
    def look_direction(self) -> Vec3:
        """Sensor convention: local +z is the optical axis and local +y is up."""
        return self.orientation.matrix[:, 2].copy()

    def inverse(self) -> Pose:
        inverse_rotation = self.orientation.inv()
        return Pose(as_tuple(-(inverse_rotation.matrix @ self.position)), inverse_rotation)

    def compose(self, other: Pose) -> Pose:
        """Pose mapping a point through `other` first, then through `self`."""
        return Pose(as_tuple(transform_point(self, other.location)), self.orientation @ other.orientation)

    def as_homogeneous(self) -> npt.NDArray[np.float64]:
        homogeneous = np.eye(4)
        homogeneous[:3, :3] = self.orientation.matrix
        homogeneous[:3, 3] = self.location
        return homogeneous


@dataclass(frozen=True)
class SurfaceFrame:
    point_normal: tuple[float, float, float]
    curvature_dir_1: tuple[float, float, float]
    curvature_dir_2: tuple[float, float, float]

    @classmethod
    def from_vectors(cls, normal: ArrayLike, dir_1: ArrayLike, dir_2: ArrayLike) -> SurfaceFrame:
        return cls(as_tuple(normal), as_tuple(dir_1), as_tuple(dir_2))

    @classmethod
    def from_matrix(cls, rows: ArrayLike) -> SurfaceFrame:
        rows = np.asarray(rows, dtype=np.float64).reshape(3, 3)
        return cls.from_vectors(rows[0], rows[1], rows[2])

    def as_matrix(self) -> npt.NDArray[np.float64]:
        """Rows are the normal, the max-curvature and the min-curvature directions."""
        return np.array([self.point_normal, self.curvature_dir_1, self.curvature_dir_2], dtype=np.float64)

    def rotated(self, rotation: Rotation) -> SurfaceFrame:
        rows = self.as_matrix() @ rotation.matrix.T
        return SurfaceFrame.from_matrix(rows)

    def orthonormality_error(self) -> float:
        rows = self.as_matrix()
        return float(np.max(np.abs(rows @ rows.T - np.eye(3))))

    def is_orthonormal(self, tolerance: float = FRAME_TOLERANCE) -> bool:
        return bool(np.all(np.isfinite(self.as_matrix()))) and self.orthonormality_error() <= tolerance


@dataclass(frozen=True)
class Displacement:
    delta: tuple[float, float, float]

    @property
    def vector(self) -> Vec3:
        return np.array(self.delta, dtype=np.float64)

    def __add__(self, other: Displacement) -> Displacement:
        return Displacement(as_tuple(self.vector + other.vector))

    def __neg__(self) -> Displacement:
        return Displacement(as_tuple(-self.vector))


def transform_point(pose: Pose, point: ArrayLike) -> Vec3:
    return pose.orientation.matrix @ as_vec3(point) + pose.position


def displacement_between(prev: ArrayLike, cur: ArrayLike) -> Displacement:
    return Displacement(as_tuple(as_vec3(cur) - as_vec3(prev)))


def _check_frame(frame: SurfaceFrame, name: str) -> None:
    if not frame.is_orthonormal():
        raise InvalidFrameError(
            f"The {name} frame is not orthonormal (error {frame.orthonormality_error():.3g})."
        )


def _basis(normal: npt.NDArray[np.float64], dir_1: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    # the second curvature direction is implied by the cross product
    return np.stack([normal, dir_1, np.cross(normal, dir_1)], axis=-1)


def axis_angle_matrices(axis: ArrayLike, angles: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Rodrigues rotation matrices about a unit axis for each angle, shape (len(angles), 3, 3)."""
    axis = as_vec3(axis)
    axis = axis / np.linalg.norm(axis)
    skew = np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]])
    angles = np.asarray(angles, dtype=np.float64)[:, None, None]
    return np.eye(3) + np.sin(angles) * skew + (1.0 - np.cos(angles)) * (skew @ skew)


def align_frame_matrices(
    sensed: SurfaceFrame,
    stored_normals: npt.NDArray[np.float64],
    stored_dirs: npt.NDArray[np.float64],
    degenerate: npt.NDArray[np.bool_],
    n_samples: int,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.intp]]:
    """Vectorized frame alignment for many stored frames at once.

    Returns the stacked rotation matrices (model frame to sensed frame) and, for each of
    them, the index of the stored frame it was generated from. Non-degenerate frames give
    two rotations (the curvature direction is ambiguous by 180 degrees); degenerate ones
    give `n_samples` rotations evenly spaced about the sensed normal.
    """
    stored_normals = np.asarray(stored_normals, dtype=np.float64).reshape(-1, 3)
    stored_dirs = np.asarray(stored_dirs, dtype=np.float64).reshape(-1, 3)
    degenerate = np.asarray(degenerate, dtype=bool).reshape(-1)
    normal = as_vec3(sensed.point_normal)
    sensed_basis = _basis(normal, as_vec3(sensed.curvature_dir_1))
    flipped_basis = sensed_basis * np.array([1.0, -1.0, -1.0])
    stored_bases = _basis(stored_normals, stored_dirs)
    stored_t = np.swapaxes(stored_bases, -1, -2)

    base = sensed_basis @ stored_t
    flipped = flipped_basis @ stored_t
    spins = axis_angle_matrices(normal, 2.0 * np.pi * np.arange(n_samples) / n_samples)

    rotations: list[npt.NDArray[np.float64]] = []
    indices: list[npt.NDArray[np.intp]] = []
    for index in range(len(stored_normals)):
        if degenerate[index]:
            rotations.append(spins @ base[index])
            indices.append(np.full(n_samples, index, dtype=np.intp))
        else:
            rotations.append(np.stack([base[index], flipped[index]]))
            indices.append(np.full(2, index, dtype=np.intp))
    if not rotations:
        return np.zeros((0, 3, 3)), np.zeros(0, dtype=np.intp)
    return np.concatenate(rotations), np.concatenate(indices)


def align_frames(
    sensed: SurfaceFrame, stored: SurfaceFrame, degenerate: bool, n_samples: int = 8
) -> list[Rotation]:
    """Rotations R mapping the stored frame onto the sensed one (R @ stored.normal == sensed.normal).

    Args:
        sensed: The frame observed by the sensor, in the body frame.
        stored: The frame stored in the model, in the model reference frame.
        degenerate: Whether the curvature directions carry no information (flat or spherical
            surface), in which case `n_samples` rotations about the normal are sampled.
        n_samples: Number of rotations sampled in the degenerate case. Defaults to 8.
    """
    if n_samples < 1:
        raise ConfigError("Valid n_samples value is greater than or equal to 1")
    _check_frame(sensed, "sensed")
    _check_frame(stored, "stored")
    matrices, _ = align_frame_matrices(
        sensed,
        np.array([stored.point_normal]),
        np.array([stored.curvature_dir_1]),
        np.array([degenerate]),
        n_samples,
    )
    return [Rotation.from_matrix(matrix) for matrix in matrices]


def _unit(vector: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    norm = np.linalg.norm(vector)
    if norm == 0 or not np.isfinite(norm):
        raise DegenerateFrameError("Cannot normalize a zero or non-finite vector.")
    return vector / norm


def orthonormalize_frame(normal: ArrayLike, dir_1: ArrayLike, dir_2: ArrayLike) -> SurfaceFrame:
    """Gram-Schmidt a noisy (normal, dir_1, dir_2) triple into a SurfaceFrame, keeping the normal."""
    n, d1, d2 = (_unit(as_vec3(v)) for v in (normal, dir_1, dir_2))
    for first, second in ((n, d1), (n, d2), (d1, d2)):
        if np.linalg.norm(np.cross(first, second)) <= math.sin(_MIN_FRAME_ANGLE):
            raise DegenerateFrameError("Frame vectors are near-collinear.")
    d1 = _unit(d1 - np.dot(d1, n) * n)
    d2 = _unit(d2 - np.dot(d2, n) * n - np.dot(d2, d1) * d1)
    return SurfaceFrame.from_vectors(n, d1, d2)
