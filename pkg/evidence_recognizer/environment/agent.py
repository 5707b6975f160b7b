from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, ClassVar, Union

import numpy as np

from evidence_recognizer.environment.scene import ray_cast
from evidence_recognizer.exceptions import ActionMismatchError, ConfigError
from evidence_recognizer.geometry import Pose, Rotation, as_tuple, as_vec3

if TYPE_CHECKING:
    from evidence_recognizer.environment.scene import Scene
    from evidence_recognizer.geometry import ArrayLike, Vec3

logger = logging.getLogger(__name__)

MAX_ORIENT_DEGREES = 180.0
CONTACT_TOLERANCE = 1e-4


class AgentKind(str, enum.Enum):
    DISTANT = "distant"
    SURFACE = "surface"


@dataclass(frozen=True, kw_only=True)
class SensorSpec:
    """A camera attached to the agent.

    Args:
        sensor_id: Unique identifier, also used as the sender id of the sensor module.
        offset: Pose of the sensor relative to the agent.
        resolution: Patch size (height, width).
        zoom: Field-of-view divisor.
    """

    sensor_id: str
    offset: Pose = field(default_factory=lambda: Pose.create((0.0, 0.0, 0.0)))
    resolution: tuple[int, int] = (16, 16)
    zoom: float = 10.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "sensor_id": self.sensor_id,
            "location": list(self.offset.location),
            "quat": list(self.offset.orientation.quat),
            "resolution": list(self.resolution),
            "zoom": self.zoom,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SensorSpec:
        return cls(
            sensor_id=str(data["sensor_id"]),
            offset=Pose(
                as_tuple(data.get("location", (0.0, 0.0, 0.0))),
                Rotation(tuple(float(v) for v in data.get("quat", (0.0, 0.0, 0.0, 1.0)))),
            ),
            resolution=tuple(data.get("resolution", (16, 16))),
            zoom=float(data.get("zoom", 10.0)),
        )


VIEW_FINDER = SensorSpec(sensor_id="view_finder", resolution=(64, 64), zoom=1.0)


@dataclass(frozen=True, kw_only=True)
class AgentState:
    """Pose of the single agent (body frame == world frame) and the sensors moving with it."""

    kind: AgentKind
    pose: Pose
    sensors: tuple[SensorSpec, ...] = (SensorSpec(sensor_id="patch"),)
    in_contact: bool = False
    contact_offset: float = 0.025

    def __post_init__(self):
        ids = [sensor.sensor_id for sensor in self.sensors]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"Sensor ids must be distinct, got {ids}")
        if self.contact_offset <= 0:
            raise ConfigError("Valid contact_offset value is greater than 0")

    def sensor(self, sensor_id: str) -> SensorSpec:
        for sensor in self.sensors:
            if sensor.sensor_id == sensor_id:
                return sensor
        if sensor_id == VIEW_FINDER.sensor_id:
            return VIEW_FINDER
        raise KeyError(sensor_id)

    def sensor_pose(self, sensor_id: str) -> Pose:
        return self.pose.compose(self.sensor(sensor_id).offset)


@dataclass(frozen=True)
class Orient:
    """Turn the look direction of a distant agent. Positive pitch looks up, positive yaw turns to local +x."""

    delta_pitch: float
    delta_yaw: float
    name: ClassVar[str] = "orient"

    def __post_init__(self):
        if not (abs(self.delta_pitch) <= MAX_ORIENT_DEGREES and abs(self.delta_yaw) <= MAX_ORIENT_DEGREES):
            raise ConfigError(f"Valid orient deltas are within +-{MAX_ORIENT_DEGREES} degrees")

    @property
    def local_rotation(self) -> Rotation:
        # a single rotation vector so that the reversed action is the exact inverse
        return Rotation.from_rotvec(np.radians([-self.delta_pitch, self.delta_yaw, 0.0]))

    def reversed(self) -> Orient:
        return Orient(-self.delta_pitch, -self.delta_yaw)

    def to_dict(self) -> dict[str, Any]:
        return {"action": self.name, "delta_pitch": self.delta_pitch, "delta_yaw": self.delta_yaw}


@dataclass(frozen=True)
class TranslateTangential:
    """Move a surface agent along the surface by a body-frame vector."""

    vector: tuple[float, float, float]
    name: ClassVar[str] = "translate_tangential"

    def __post_init__(self):
        if len(self.vector) != 3 or not all(math.isfinite(v) for v in self.vector):
            raise ConfigError("Valid translation is a finite 3D vector")

    def reversed(self) -> TranslateTangential:
        return TranslateTangential(tuple(-v for v in self.vector))

    def to_dict(self) -> dict[str, Any]:
        return {"action": self.name, "vector": list(self.vector)}


@dataclass(frozen=True)
class MoveForward:
    distance: float
    name: ClassVar[str] = "move_forward"

    def __post_init__(self):
        if not math.isfinite(self.distance):
            raise ConfigError("Valid distance is finite")

    def reversed(self) -> MoveForward:
        return MoveForward(-self.distance)

    def to_dict(self) -> dict[str, Any]:
        return {"action": self.name, "distance": self.distance}


@dataclass(frozen=True)
class OrientToFace:
    target: tuple[float, float, float]
    name: ClassVar[str] = "orient_to_face"

    def reversed(self) -> OrientToFace:
        raise ActionMismatchError("Absolute actions cannot be reversed")

    def to_dict(self) -> dict[str, Any]:
        return {"action": self.name, "target": list(self.target)}


@dataclass(frozen=True)
class JumpToPose:
    pose: Pose
    name: ClassVar[str] = "jump_to_pose"

    def reversed(self) -> JumpToPose:
        raise ActionMismatchError("Absolute actions cannot be reversed")

    def to_dict(self) -> dict[str, Any]:
        return {
            "action": self.name,
            "location": list(self.pose.location),
            "quat": list(self.pose.orientation.quat),
        }


Action = Union[Orient, TranslateTangential, MoveForward, OrientToFace, JumpToPose]


def look_rotation(forward: ArrayLike, up: ArrayLike = (0.0, 0.0, 1.0)) -> Rotation:
    """Sensor orientation whose +z looks along `forward` and whose +y is as close to `up` as possible."""
    z = as_vec3(forward)
    z = z / np.linalg.norm(z)
    x = np.cross(as_vec3(up), z)
    if np.linalg.norm(x) < 1e-9:
        helper = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        x = np.cross(helper, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return Rotation.from_matrix(np.stack([x, y, z], axis=1))


def _up(agent: AgentState) -> Vec3:
    return agent.pose.orientation.matrix[:, 1].copy()


def _contact(scene: Scene, agent: AgentState) -> bool:
    hit = ray_cast(scene, agent.pose.position, agent.pose.look_direction)
    return hit is not None and abs(hit.distance - agent.contact_offset) <= CONTACT_TOLERANCE


def _settle_on_surface(
    scene: Scene, agent: AgentState, position: Vec3, look: Vec3, margin: float
) -> AgentState:
    hit = ray_cast(scene, position - look * margin, look)
    if hit is None and scene.instances:
        # fall back to looking at the nearest object origin
        centers = [item.pose.position for item in scene.instances]
        center = min(centers, key=lambda c: float(np.linalg.norm(c - position)))
        towards = center - position
        if np.linalg.norm(towards) > 0:
            hit = ray_cast(scene, position, towards / np.linalg.norm(towards))
    if hit is None:
        logger.debug("Surface agent lost the object, pose unchanged")
        return replace(agent, in_contact=False)
    normal = as_vec3(hit.normal)
    location = hit.location + agent.contact_offset * normal
    orientation = look_rotation(-normal, _up(agent))
    return replace(agent, pose=Pose.create(location, orientation), in_contact=True)


def apply_action(scene: Scene, agent: AgentState, action: Action) -> AgentState:
    """Return the agent state after executing `action`; the scene is never modified."""
    if isinstance(action, JumpToPose):
        moved = replace(agent, pose=action.pose)
        return replace(moved, in_contact=_contact(scene, moved)) if agent.kind is AgentKind.SURFACE else moved

    if isinstance(action, Orient):
        if agent.kind is not AgentKind.DISTANT:
            raise ActionMismatchError("orient is only available to the distant agent")
        if action.delta_pitch == 0 and action.delta_yaw == 0:
            return agent
        return replace(agent, pose=Pose(agent.pose.location, agent.pose.orientation @ action.local_rotation))

    if isinstance(action, TranslateTangential):
        if agent.kind is not AgentKind.SURFACE:
            raise ActionMismatchError("translate_tangential is only available to the surface agent")
        look = agent.pose.look_direction
        translation = as_vec3(action.vector)
        tangential = translation - np.dot(translation, look) * look
        position = agent.pose.position + tangential
        margin = agent.contact_offset + float(np.linalg.norm(tangential))
        return _settle_on_surface(scene, agent, position, look, margin)

    if isinstance(action, MoveForward):
        look = agent.pose.look_direction
        distance = action.distance
        if agent.kind is AgentKind.SURFACE:
            hit = ray_cast(scene, agent.pose.position, look)
            if hit is not None and hit.distance - distance < agent.contact_offset:
                distance = hit.distance - agent.contact_offset
        position = agent.pose.position + distance * look
        moved = replace(agent, pose=Pose.create(position, agent.pose.orientation))
        return replace(moved, in_contact=_contact(scene, moved)) if agent.kind is AgentKind.SURFACE else moved

    if isinstance(action, OrientToFace):
        forward = as_vec3(action.target) - agent.pose.position
        if np.linalg.norm(forward) == 0:
            return agent
        return replace(agent, pose=Pose(agent.pose.location, look_rotation(forward, _up(agent))))

    raise ActionMismatchError(f"Unknown action {action!r}")


def action_from_dict(data: dict[str, Any]) -> Action:
    name = data["action"]
    if name == Orient.name:
        return Orient(float(data["delta_pitch"]), float(data["delta_yaw"]))
    if name == TranslateTangential.name:
        return TranslateTangential(as_tuple(data["vector"]))
    if name == MoveForward.name:
        return MoveForward(float(data["distance"]))
    if name == OrientToFace.name:
        return OrientToFace(as_tuple(data["target"]))
    if name == JumpToPose.name:
        return JumpToPose(Pose(as_tuple(data["location"]), Rotation.from_quat(data["quat"])))
    raise ConfigError(f"Unknown action {name!r}")
