from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

import numpy as np
import scipy.linalg

from evidence_recognizer.cmp import SenderType, StateMessage
from evidence_recognizer.exceptions import (
    ConfigError,
    DegenerateFrameError,
    FitError,
    InsufficientPointsError,
)
from evidence_recognizer.geometry import SurfaceFrame, as_tuple, orthonormalize_frame

if TYPE_CHECKING:
    import numpy.typing as npt

    from evidence_recognizer.environment.scene import Patch
    from evidence_recognizer.geometry import Vec3

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 6


@dataclass(frozen=True)
class CurvatureEstimate:
    dir_1: Vec3
    dir_2: Vec3
    k1: float
    k2: float
    degenerate: bool
    rms: float


@dataclass(kw_only=True)
class SensorConfig:
    """Parameters of a sensor module.

    Args:
        confidence_scale: Fit residual (m) at which the confidence drops to 1/e. Defaults to 1e-3.
        min_displacement: Moves shorter than this (m) count as "no movement" for the change gate.
            Defaults to 1e-3.
        change_tolerances: Per-feature distances under which a feature counts as unchanged.
        degeneracy_ratio: Curvatures are degenerate when |k1 - k2| < ratio * max(|k1|, |k2|, 1).
            Defaults to 0.1.
        depth_noise_std: Standard deviation (m) of additive Gaussian depth noise. Defaults to 0.
    """

    confidence_scale: float = 1e-3
    min_displacement: float = 1e-3
    change_tolerances: dict[str, float] = field(
        default_factory=lambda: {"rgba": 0.05, "principal_curvatures": 2.0}
    )
    degeneracy_ratio: float = 0.1
    depth_noise_std: float = 0.0

    def __post_init__(self):
        if self.confidence_scale <= 0:
            raise ConfigError("Valid confidence_scale value is greater than 0")
        if self.min_displacement < 0:
            raise ConfigError("Valid min_displacement value is greater than or equal to 0")
        if self.depth_noise_std < 0:
            raise ConfigError("Valid depth_noise_std value is greater than or equal to 0")
        if not 0 < self.degeneracy_ratio < 1:
            raise ConfigError("Valid degeneracy_ratio value is between 0 and 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "confidence_scale": self.confidence_scale,
            "min_displacement": self.min_displacement,
            "change_tolerances": dict(self.change_tolerances),
            "degeneracy_ratio": self.degeneracy_ratio,
            "depth_noise_std": self.depth_noise_std,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SensorConfig:
        return cls(**data)


def _on_object_points(patch: Patch) -> npt.NDArray[np.float64]:
    points = patch.on_object_points()
    if len(points) < MIN_FIT_POINTS:
        raise InsufficientPointsError(
            f"Need at least {MIN_FIT_POINTS} on-object points, the patch has {len(points)}."
        )
    return points


def estimate_point_normal(patch: Patch) -> Vec3:
    """Total least squares plane normal of the on-object points, oriented towards the sensor."""
    points = _on_object_points(patch)
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid, full_matrices=False)
    normal = vt[-1] / np.linalg.norm(vt[-1])
    if np.dot(normal, centroid - patch.sensor_pose.position) > 0:
        normal = -normal
    return normal


def _tangent_frame(normal: Vec3) -> tuple[Vec3, Vec3]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(normal, helper)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(normal, t1)


def estimate_principal_curvatures(
    patch: Patch, normal: Vec3, degeneracy_ratio: float = 0.1
) -> CurvatureEstimate:
    """Fit z = ax^2 + bxy + cy^2 + dx + ey + f in the tangent frame at the patch center.

    Curvatures are positive where the surface is convex as seen from the sensor; `k1 >= k2`
    and `dir_1`/`dir_2` are the corresponding principal directions in the body frame.
    """
    points = _on_object_points(patch)
    t1, t2 = _tangent_frame(normal)
    offsets = points - patch.center_location
    x, y, height = offsets @ t1, offsets @ t2, offsets @ normal
    scale = max(float(np.max(np.abs(x))), float(np.max(np.abs(y))), 1e-12)
    u, v = x / scale, y / scale
    design = np.stack([u**2, u * v, v**2, u, v, np.ones_like(u)], axis=1)
    coefficients, _, rank, _ = np.linalg.lstsq(design, height, rcond=None)
    if rank < design.shape[1]:
        raise FitError(f"Quadric fit is rank deficient (rank {rank})")
    a, b, c = coefficients[:3] / scale**2
    d, e = coefficients[3:5] / scale
    rms = float(np.sqrt(np.mean((design @ coefficients - height) ** 2)))

    first = np.array([[1 + d * d, d * e], [d * e, 1 + e * e]])
    w = math.sqrt(1 + d * d + e * e)
    second = np.array([[2 * a, b], [b, 2 * c]]) / w
    curvatures, vectors = scipy.linalg.eigh(second, first)
    # the fit normal points towards the sensor, so convex surfaces have negative normal curvature
    k1, k2 = -float(curvatures[0]), -float(curvatures[1])
    r_x, r_y = t1 + d * normal, t2 + e * normal
    dir_1 = vectors[0, 0] * r_x + vectors[1, 0] * r_y
    dir_2 = vectors[0, 1] * r_x + vectors[1, 1] * r_y
    degenerate = abs(k1 - k2) < degeneracy_ratio * max(abs(k1), abs(k2), 1.0)
    return CurvatureEstimate(
        dir_1=dir_1 / np.linalg.norm(dir_1),
        dir_2=dir_2 / np.linalg.norm(dir_2),
        k1=k1,
        k2=k2,
        degenerate=bool(degenerate),
        rms=rms,
    )


def default_frame(patch: Patch) -> SurfaceFrame:
    rotation = patch.sensor_pose.orientation.matrix
    return SurfaceFrame.from_vectors(-rotation[:, 2], rotation[:, 0], rotation[:, 1])


def _feature_deltas_small(msg: StateMessage, prev: StateMessage, tolerances: dict[str, float]) -> bool:
    for name, tolerance in tolerances.items():
        current, previous = msg.feature(name), prev.feature(name)
        if current is None or previous is None:
            continue
        if current.shape != previous.shape or np.linalg.norm(current - previous) >= tolerance:
            return False
    return True


def to_cmp(
    patch: Patch,
    prev_sent: StateMessage | None,
    config: SensorConfig | None = None,
    *,
    sender_id: str = "patch",
) -> StateMessage:
    """Convert a patch into a state message about the feature at its center pixel.

    Estimation failures never raise: they produce a message with `use_state=False` and confidence 0.
    """
    config = config or SensorConfig()
    location = as_tuple(patch.center_location)
    color = as_tuple(patch.center_color)
    failed = StateMessage(
        location=location,
        morphological_features=default_frame(patch),
        non_morphological_features={
            "rgba": color,
            "principal_curvatures": (0.0, 0.0),
            "curvature_degenerate": (1.0,),
        },
        confidence=0.0,
        use_state=False,
        sender_id=sender_id,
        sender_type=SenderType.SM,
    )
    if not patch.center_on_object:
        logger.debug(f"{sender_id}: patch center is off the object")
        return failed
    try:
        normal = estimate_point_normal(patch)
        curvature = estimate_principal_curvatures(patch, normal, config.degeneracy_ratio)
        frame = orthonormalize_frame(normal, curvature.dir_1, np.cross(normal, curvature.dir_1))
    except (InsufficientPointsError, FitError, DegenerateFrameError) as e:
        logger.debug(f"{sender_id}: surface estimation failed: {e}")
        return failed

    msg = StateMessage(
        location=location,
        morphological_features=frame,
        non_morphological_features={
            "rgba": color,
            "principal_curvatures": (curvature.k1, curvature.k2),
            "curvature_degenerate": (1.0 if curvature.degenerate else 0.0,),
        },
        confidence=float(np.clip(math.exp(-curvature.rms / config.confidence_scale), 0.0, 1.0)),
        use_state=True,
        sender_id=sender_id,
        sender_type=SenderType.SM,
    )
    if prev_sent is not None:
        moved = float(np.linalg.norm(msg.position - prev_sent.position))
        unchanged = _feature_deltas_small(msg, prev_sent, config.change_tolerances)
        if moved < config.min_displacement and unchanged:
            logger.debug(f"{sender_id}: input barely changed, message gated")
            return replace(msg, use_state=False)
    return msg


def add_depth_noise(patch: Patch, std: float, rng: np.random.Generator) -> Patch:
    """Perturb the depth of every on-object pixel along its ray."""
    noise = np.where(patch.on_object, rng.normal(0.0, std, size=patch.on_object.shape), 0.0)
    depths = patch.depths + noise
    locations = patch.sensor_pose.position + depths[..., None] * patch.ray_directions
    return replace(patch, depths=depths, locations=locations)


class SensorModule:
    """Turns the patches of one sensor into state messages, remembering the last message it sent.

    Args:
        sensor_id (str): Id of the sensor, used as the sender id of the messages.
        config (SensorConfig, optional): Defaults to `SensorConfig()`.
        rng (numpy.random.Generator, optional): Source of depth noise. Required when
            `config.depth_noise_std` is greater than 0.
    """

    logger = logging.getLogger(__name__)

    def __init__(
        self, *, sensor_id: str, config: SensorConfig | None = None, rng: np.random.Generator | None = None
    ):
        if not sensor_id:
            raise ConfigError("Valid sensor_id value is a non-empty string")
        self.sensor_id = sensor_id
        self.config = config or SensorConfig()
        if self.config.depth_noise_std > 0 and rng is None:
            raise ConfigError("A random generator is required when depth noise is enabled")
        self.rng = rng
        self.prev_sent: StateMessage | None = None

    def reset(self, rng: np.random.Generator | None = None) -> None:
        self.prev_sent = None
        if rng is not None:
            self.rng = rng

    def step(self, patch: Patch) -> StateMessage:
        if self.config.depth_noise_std > 0:
            patch = add_depth_noise(patch, self.config.depth_noise_std, self.rng)
        msg = to_cmp(patch, self.prev_sent, self.config, sender_id=self.sensor_id)
        if msg.use_state:
            self.prev_sent = msg
        self.logger.debug(f"{self.sensor_id}: sent message at {msg.location} (use_state={msg.use_state})")
        return msg
