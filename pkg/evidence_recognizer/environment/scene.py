from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from evidence_recognizer.environment.shapes import (
    Box,
    Capsule,
    Composite,
    Cylinder,
    Part,
    RayHits,
    SceneObject,
    Sphere,
    SurfaceProperties,
    Torus,
    shape_from_dict,
)
from evidence_recognizer.exceptions import ConfigError, SchemaError
from evidence_recognizer.geometry import Pose, Rotation, as_tuple, as_vec3

if TYPE_CHECKING:
    import numpy.typing as npt

    from evidence_recognizer.geometry import ArrayLike, Vec3

logger = logging.getLogger(__name__)

DEFAULT_FIELD_OF_VIEW = 90.0
FAR_PLANE = 10.0
MIN_PATCH_SIZE = 5


@dataclass(frozen=True)
class ObjectInstance:
    object: SceneObject
    pose: Pose
    ground_truth_label: str

    def to_local(self, points: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return (np.atleast_2d(points) - self.pose.position) @ self.pose.orientation.matrix

    def signed_distance(self, points: ArrayLike) -> npt.NDArray[np.float64]:
        return self.object.signed_distance(self.to_local(np.asarray(points, dtype=np.float64)))

    def surface_properties(self, point: ArrayLike) -> SurfaceProperties:
        local = self.to_local(as_vec3(point))[0]
        return self.object.surface_properties(local).transformed(self.pose.orientation)


@dataclass(frozen=True)
class RayHit:
    location: Vec3
    distance: float
    normal: Vec3
    part_color: tuple[float, float, float, float]
    object_ref: str


@dataclass(frozen=True)
class SceneHits:
    """Batched ray-cast result in the body frame; `instance` is -1 for misses."""

    distance: npt.NDArray[np.float64]
    locations: npt.NDArray[np.float64]
    normals: npt.NDArray[np.float64]
    colors: npt.NDArray[np.float64]
    instance: npt.NDArray[np.intp]

    @property
    def hit(self) -> npt.NDArray[np.bool_]:
        return self.instance >= 0


@dataclass(frozen=True)
class Scene:
    """Static world of posed objects; body frame and world frame coincide."""

    instances: tuple[ObjectInstance, ...]

    @classmethod
    def single(cls, obj: SceneObject, label: str, pose: Pose | None = None) -> Scene:
        return cls((ObjectInstance(obj, pose or Pose.create((0.0, 0.0, 0.0)), label),))

    def cast_rays(self, origins: npt.NDArray[np.float64], directions: npt.NDArray[np.float64]) -> SceneHits:
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        count = len(origins)
        nearest = RayHits.misses(count)
        instance = np.full(count, -1, dtype=np.intp)
        for index, item in enumerate(self.instances):
            rotation = item.pose.orientation.matrix
            local_hits = item.object.intersect(item.to_local(origins), directions @ rotation)
            world_hits = RayHits(local_hits.distance, local_hits.normals @ rotation.T, local_hits.colors)
            closer = world_hits.distance < nearest.distance
            instance = np.where(closer, index, instance)
            nearest = nearest.merge(world_hits)
        distance = nearest.distance
        locations = origins + np.where(np.isfinite(distance), distance, 0.0)[:, None] * directions
        return SceneHits(distance, locations, nearest.normals, nearest.colors, instance)

    def signed_distance(self, points: ArrayLike) -> npt.NDArray[np.float64]:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.min([item.signed_distance(points) for item in self.instances], axis=0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "objects": [
                {
                    "label": item.ground_truth_label,
                    "shape": item.object.to_dict(),
                    "location": list(item.pose.location),
                    "quat": list(item.pose.orientation.quat),
                }
                for item in self.instances
            ]
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> Scene:
        try:
            instances = []
            for entry in data["objects"]:
                if "quat" in entry:
                    rotation = Rotation.from_quat(entry["quat"])
                else:
                    rotation = Rotation.from_euler("xyz", entry.get("rotation", (0.0, 0.0, 0.0)))
                instances.append(
                    ObjectInstance(
                        shape_from_dict(entry["shape"], base_dir),
                        Pose(as_tuple(entry.get("location", (0.0, 0.0, 0.0))), rotation),
                        str(entry["label"]),
                    )
                )
        except (KeyError, TypeError) as e:
            raise SchemaError(f"Invalid scene description: {e!r}") from e
        return cls(tuple(instances))


def load_scene(path: str | Path) -> Scene:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}") from e
    return Scene.from_dict(data, base_dir=path.parent)


def ray_cast(scene: Scene, origin: ArrayLike, direction: ArrayLike) -> RayHit | None:
    """Nearest intersection of a single ray with the scene, or None for a miss."""
    hits = scene.cast_rays(as_vec3(origin)[None, :], as_vec3(direction)[None, :])
    if not hits.hit[0]:
        return None
    return RayHit(
        location=hits.locations[0],
        distance=float(hits.distance[0]),
        normal=hits.normals[0],
        part_color=tuple(float(c) for c in hits.colors[0]),
        object_ref=scene.instances[int(hits.instance[0])].ground_truth_label,
    )


@dataclass(frozen=True, eq=False)
class Patch:
    """A sensed HxW grid of body-frame points with colors and on-object flags."""

    locations: npt.NDArray[np.float64]
    colors: npt.NDArray[np.float64]
    on_object: npt.NDArray[np.bool_]
    depths: npt.NDArray[np.float64]
    ray_directions: npt.NDArray[np.float64]
    sensor_pose: Pose
    zoom: float

    @property
    def resolution(self) -> tuple[int, int]:
        return self.on_object.shape

    @property
    def center_index(self) -> tuple[int, int]:
        height, width = self.resolution
        return height // 2, width // 2

    @property
    def center_on_object(self) -> bool:
        return bool(self.on_object[self.center_index])

    @property
    def center_location(self) -> Vec3:
        return self.locations[self.center_index].copy()

    @property
    def center_color(self) -> npt.NDArray[np.float64]:
        return self.colors[self.center_index].copy()

    @property
    def on_object_fraction(self) -> float:
        return float(self.on_object.mean())

    def on_object_points(self) -> npt.NDArray[np.float64]:
        return self.locations[self.on_object]


def pixel_directions(
    sensor_pose: Pose, resolution: tuple[int, int], zoom: float, field_of_view: float = DEFAULT_FIELD_OF_VIEW
) -> npt.NDArray[np.float64]:
    """Unit body-frame ray directions of a pinhole sensor, shape (H, W, 3).

    The pixel at (H // 2, W // 2) lies exactly on the optical axis.
    """
    height, width = resolution
    tan_half = math.tan(math.radians(field_of_view) / 2) / zoom
    pitch = 2 * tan_half / (max(height, width) - 1)
    u = (np.arange(width) - width // 2) * pitch
    v = (height // 2 - np.arange(height)) * pitch
    grid_u, grid_v = np.meshgrid(u, v)
    local = np.stack([grid_u, grid_v, np.ones_like(grid_u)], axis=-1)
    local /= np.linalg.norm(local, axis=-1, keepdims=True)
    return local @ sensor_pose.orientation.matrix.T


def sense_patch(
    scene: Scene,
    sensor_pose: Pose,
    resolution: tuple[int, int] = (16, 16),
    zoom: float = 10.0,
    field_of_view: float = DEFAULT_FIELD_OF_VIEW,
) -> Patch:
    """Cast one ray per pixel through a pinhole model whose field of view is divided by `zoom`."""
    height, width = resolution
    if height < MIN_PATCH_SIZE or width < MIN_PATCH_SIZE:
        raise ConfigError(f"Valid patch resolution is at least {MIN_PATCH_SIZE}x{MIN_PATCH_SIZE}")
    if zoom <= 0:
        raise ConfigError("Valid zoom value is greater than 0")
    directions = pixel_directions(sensor_pose, resolution, zoom, field_of_view)
    flat_directions = directions.reshape(-1, 3)
    origins = np.broadcast_to(sensor_pose.position, flat_directions.shape)
    hits = scene.cast_rays(origins, flat_directions)
    on_object = hits.hit
    depths = np.where(on_object, hits.distance, FAR_PLANE)
    locations = origins + depths[:, None] * flat_directions
    colors = np.where(on_object[:, None], hits.colors, 0.0)
    return Patch(
        locations=locations.reshape(height, width, 3),
        colors=colors.reshape(height, width, 4),
        on_object=on_object.reshape(height, width),
        depths=depths.reshape(height, width),
        ray_directions=directions,
        sensor_pose=sensor_pose,
        zoom=zoom,
    )


def analytic_surface_properties(shape: SceneObject, surface_point: ArrayLike) -> SurfaceProperties:
    """Exact normal, principal directions and curvatures (convex positive) at a point of a primitive."""
    return shape.surface_properties(as_vec3(surface_point))


RED = (0.9, 0.1, 0.1, 1.0)
BLUE = (0.1, 0.2, 0.9, 1.0)
WHITE = (0.92, 0.92, 0.92, 1.0)


def two_tone_cylinder(radius: float = 0.035, height: float = 0.09) -> Composite:
    """Cylinder whose upper half is red and lower half is blue."""
    half = height / 2
    return Composite(
        parts=(
            Part(Cylinder(radius=radius, height=half), Pose.create((0.0, 0.0, half / 2)), RED),
            Part(Cylinder(radius=radius, height=half), Pose.create((0.0, 0.0, -half / 2)), BLUE),
        ),
        color=RED,
    )


def mug(
    radius: float = 0.035, height: float = 0.09, handle_radius: float = 0.025, thickness: float = 0.007
) -> Composite:
    """Cylinder body with a torus handle standing in the xz plane on the +x side."""
    return Composite(
        parts=(
            Part(Cylinder(radius=radius, height=height, color=WHITE), Pose.create((0.0, 0.0, 0.0)), WHITE),
            Part(
                Torus(major_radius=handle_radius, minor_radius=thickness, color=WHITE),
                Pose.create((radius, 0.0, 0.0), Rotation.from_euler("x", 90.0)),
                WHITE,
            ),
        ),
        color=WHITE,
    )


def default_objects() -> dict[str, SceneObject]:
    """The benchmark object set."""
    return {
        "sphere": Sphere(radius=0.04, color=(0.2, 0.7, 0.2, 1.0)),
        "cube": Box(size=(0.07, 0.07, 0.07), color=(0.9, 0.8, 0.1, 1.0)),
        "cylinder": Cylinder(radius=0.035, height=0.09, color=(0.9, 0.5, 0.1, 1.0)),
        "capsule": Capsule(radius=0.03, height=0.06, color=(0.6, 0.2, 0.7, 1.0)),
        "torus": Torus(major_radius=0.035, minor_radius=0.015, color=(0.1, 0.7, 0.8, 1.0)),
        "book": Box(size=(0.1, 0.07, 0.025), color=(0.5, 0.3, 0.15, 1.0)),
        "two_tone_cylinder": two_tone_cylinder(),
        "mug": mug(),
    }
