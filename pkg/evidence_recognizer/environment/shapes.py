from __future__ import annotations

import abc
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from evidence_recognizer.exceptions import ConfigError, SchemaError, SurfacePropertyError
from evidence_recognizer.geometry import Pose, Rotation, as_tuple, as_vec3

if TYPE_CHECKING:
    import numpy.typing as npt

    FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

RAY_EPSILON = 1e-9
SURFACE_TOLERANCE = 1e-6
DEFAULT_COLOR = (0.5, 0.5, 0.5, 1.0)


@dataclass(frozen=True)
class RayHits:
    """Nearest hits of a batch of rays; `distance` is `inf` where a ray misses."""

    distance: FloatArray
    normals: FloatArray
    colors: FloatArray

    @classmethod
    def misses(cls, count: int) -> RayHits:
        return cls(np.full(count, np.inf), np.zeros((count, 3)), np.zeros((count, 4)))

    @property
    def hit(self) -> npt.NDArray[np.bool_]:
        return np.isfinite(self.distance)

    def merge(self, other: RayHits) -> RayHits:
        closer = other.distance < self.distance
        return RayHits(
            np.where(closer, other.distance, self.distance),
            np.where(closer[:, None], other.normals, self.normals),
            np.where(closer[:, None], other.colors, self.colors),
        )


@dataclass(frozen=True)
class SurfaceProperties:
    normal: FloatArray
    dir_1: FloatArray
    dir_2: FloatArray
    k1: float
    k2: float

    def transformed(self, rotation: Rotation) -> SurfaceProperties:
        return SurfaceProperties(
            rotation.apply(self.normal),
            rotation.apply(self.dir_1),
            rotation.apply(self.dir_2),
            self.k1,
            self.k2,
        )


def _tangent_basis(normal: FloatArray) -> tuple[FloatArray, FloatArray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    dir_1 = np.cross(normal, helper)
    dir_1 /= np.linalg.norm(dir_1)
    return dir_1, np.cross(normal, dir_1)


def _first_positive(*candidates: FloatArray) -> FloatArray:
    """Smallest candidate distance above RAY_EPSILON, `inf` if none."""
    stacked = np.stack(candidates)
    stacked = np.where(np.isfinite(stacked) & (stacked > RAY_EPSILON), stacked, np.inf)
    return stacked.min(axis=0)


def _sphere_distances(
    origins: FloatArray, directions: FloatArray, center: FloatArray, radius: float
) -> FloatArray:
    offset = origins - center
    b = np.einsum("ij,ij->i", offset, directions)
    c = np.einsum("ij,ij->i", offset, offset) - radius**2
    disc = b**2 - c
    root = np.sqrt(np.where(disc >= 0, disc, np.nan))
    with np.errstate(invalid="ignore"):
        return _first_positive(-b - root, -b + root)


def _lateral_distances(origins: FloatArray, directions: FloatArray, radius: float, half_height: float):
    a = directions[:, 0] ** 2 + directions[:, 1] ** 2
    b = origins[:, 0] * directions[:, 0] + origins[:, 1] * directions[:, 1]
    c = origins[:, 0] ** 2 + origins[:, 1] ** 2 - radius**2
    disc = b**2 - a * c
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(np.where((disc >= 0) & (a > 0), disc, np.nan))
        candidates = []
        for t in ((-b - root) / a, (-b + root) / a):
            z = origins[:, 2] + t * directions[:, 2]
            candidates.append(np.where(np.abs(z) <= half_height, t, np.nan))
    return _first_positive(*candidates)


@dataclass(frozen=True, kw_only=True)
class SceneObject(abc.ABC):
    """A solid whose surface can be ray cast, in its own local frame."""

    color: tuple[float, float, float, float] = DEFAULT_COLOR

    @abc.abstractmethod
    def intersect(self, origins: FloatArray, directions: FloatArray) -> RayHits:
        """Nearest hits of rays (local frame) with the surface, normals pointing outwards."""

    @abc.abstractmethod
    def signed_distance(self, points: FloatArray) -> FloatArray:
        """Signed distance of local points to the surface, negative inside."""

    @abc.abstractmethod
    def _surface_properties(self, point: FloatArray) -> SurfaceProperties:
        pass

    @abc.abstractmethod
    def to_dict(self) -> dict[str, Any]:
        pass

    def _colors(self, count: int) -> FloatArray:
        return np.tile(np.asarray(self.color, dtype=np.float64), (count, 1))

    def surface_properties(self, point: FloatArray) -> SurfaceProperties:
        point = as_vec3(point)
        distance = float(self.signed_distance(point[None, :])[0])
        if abs(distance) > SURFACE_TOLERANCE:
            raise SurfacePropertyError(f"Point is {distance:.3g} m away from the surface.")
        return self._surface_properties(point)


@dataclass(frozen=True, kw_only=True)
class Sphere(SceneObject):
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("Valid radius value is greater than 0")

    def intersect(self, origins, directions):
        distance = _sphere_distances(origins, directions, np.zeros(3), self.radius)
        points = origins + np.where(np.isfinite(distance), distance, 0.0)[:, None] * directions
        return RayHits(distance, points / self.radius, self._colors(len(origins)))

    def signed_distance(self, points):
        return np.linalg.norm(points, axis=-1) - self.radius

    def _surface_properties(self, point):
        normal = point / np.linalg.norm(point)
        dir_1, dir_2 = _tangent_basis(normal)
        return SurfaceProperties(normal, dir_1, dir_2, 1.0 / self.radius, 1.0 / self.radius)

    def to_dict(self):
        return {"type": "sphere", "radius": self.radius, "color": list(self.color)}


@dataclass(frozen=True, kw_only=True)
class Cylinder(SceneObject):
    """Capped cylinder along the local z axis, centered on the origin."""

    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ConfigError("Valid radius and height values are greater than 0")

    def intersect(self, origins, directions):
        half = self.height / 2
        lateral = _lateral_distances(origins, directions, self.radius, half)
        caps = []
        with np.errstate(invalid="ignore", divide="ignore"):
            for z in (half, -half):
                t = (z - origins[:, 2]) / directions[:, 2]
                x = origins[:, 0] + t * directions[:, 0]
                y = origins[:, 1] + t * directions[:, 1]
                caps.append(np.where(x**2 + y**2 <= self.radius**2, t, np.nan))
        distance = _first_positive(lateral, *caps)
        points = origins + np.where(np.isfinite(distance), distance, 0.0)[:, None] * directions
        normals = np.zeros_like(points)
        on_lateral = distance == lateral
        normals[on_lateral, :2] = points[on_lateral, :2] / self.radius
        normals[~on_lateral, 2] = np.sign(points[~on_lateral, 2])
        return RayHits(distance, normals, self._colors(len(origins)))

    def signed_distance(self, points):
        points = np.atleast_2d(points)
        radial = np.linalg.norm(points[:, :2], axis=1) - self.radius
        d = np.stack([radial, np.abs(points[:, 2]) - self.height / 2], axis=1)
        return np.minimum(d.max(axis=1), 0.0) + np.linalg.norm(np.maximum(d, 0.0), axis=1)

    def _surface_properties(self, point):
        rho = np.linalg.norm(point[:2])
        on_cap = abs(abs(point[2]) - self.height / 2) <= SURFACE_TOLERANCE
        on_side = abs(rho - self.radius) <= SURFACE_TOLERANCE
        if on_cap and on_side:
            raise SurfacePropertyError("Point lies on the rim of the cylinder.")
        if on_cap:
            normal = np.array([0.0, 0.0, np.sign(point[2])])
            return SurfaceProperties(normal, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), 0, 0)
        normal = np.array([point[0], point[1], 0.0]) / rho
        axis = np.array([0.0, 0.0, 1.0])
        return SurfaceProperties(normal, np.cross(axis, normal), axis, 1.0 / self.radius, 0.0)

    def to_dict(self):
        return {"type": "cylinder", "radius": self.radius, "height": self.height, "color": list(self.color)}


@dataclass(frozen=True, kw_only=True)
class Capsule(SceneObject):
    """Cylinder of `height` along local z with hemispherical ends."""

    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ConfigError("Valid radius and height values are greater than 0")

    def _end_centers(self) -> tuple[FloatArray, FloatArray]:
        return np.array([0.0, 0.0, self.height / 2]), np.array([0.0, 0.0, -self.height / 2])

    def intersect(self, origins, directions):
        top, bottom = self._end_centers()
        distance = _first_positive(
            _lateral_distances(origins, directions, self.radius, self.height / 2),
            _sphere_distances(origins, directions, top, self.radius),
            _sphere_distances(origins, directions, bottom, self.radius),
        )
        points = origins + np.where(np.isfinite(distance), distance, 0.0)[:, None] * directions
        axis_points = np.zeros_like(points)
        axis_points[:, 2] = np.clip(points[:, 2], -self.height / 2, self.height / 2)
        normals = (points - axis_points) / self.radius
        return RayHits(distance, normals, self._colors(len(origins)))

    def signed_distance(self, points):
        points = np.atleast_2d(points)
        axis_points = np.zeros_like(points)
        axis_points[:, 2] = np.clip(points[:, 2], -self.height / 2, self.height / 2)
        return np.linalg.norm(points - axis_points, axis=1) - self.radius

    def _surface_properties(self, point):
        if abs(point[2]) <= self.height / 2:
            normal = np.array([point[0], point[1], 0.0]) / np.linalg.norm(point[:2])
            axis = np.array([0.0, 0.0, 1.0])
            return SurfaceProperties(normal, np.cross(axis, normal), axis, 1.0 / self.radius, 0.0)
        center = np.array([0.0, 0.0, np.sign(point[2]) * self.height / 2])
        normal = (point - center) / self.radius
        dir_1, dir_2 = _tangent_basis(normal)
        return SurfaceProperties(normal, dir_1, dir_2, 1.0 / self.radius, 1.0 / self.radius)

    def to_dict(self):
        return {"type": "capsule", "radius": self.radius, "height": self.height, "color": list(self.color)}


@dataclass(frozen=True, kw_only=True)
class Box(SceneObject):
    """Axis-aligned box of size (width, height, depth) along local (x, y, z)."""

    size: tuple[float, float, float]

    def __post_init__(self):
        if len(self.size) != 3 or min(self.size) <= 0:
            raise ConfigError("Valid box size is three values greater than 0")

    @property
    def half_extents(self) -> FloatArray:
        return np.asarray(self.size, dtype=np.float64) / 2

    def intersect(self, origins, directions):
        half = self.half_extents
        with np.errstate(divide="ignore", invalid="ignore"):
            inverse = np.where(directions != 0, 1.0 / directions, np.inf)
            t1 = (-half - origins) * inverse
            t2 = (half - origins) * inverse
        near = np.minimum(t1, t2)
        far = np.maximum(t1, t2)
        t_near = near.max(axis=1)
        t_far = far.min(axis=1)
        valid = (t_far >= np.maximum(t_near, RAY_EPSILON)) & np.isfinite(t_near)
        distance = np.where(valid, np.where(t_near > RAY_EPSILON, t_near, t_far), np.inf)
        points = origins + np.where(valid, distance, 0.0)[:, None] * directions
        normals = np.zeros_like(points)
        axis = np.argmax(np.abs(points) / half, axis=1)
        rows = np.arange(len(points))
        normals[rows, axis] = np.sign(points[rows, axis])
        return RayHits(distance, normals, self._colors(len(origins)))

    def signed_distance(self, points):
        q = np.abs(np.atleast_2d(points)) - self.half_extents
        return np.linalg.norm(np.maximum(q, 0.0), axis=1) + np.minimum(q.max(axis=1), 0.0)

    def _surface_properties(self, point):
        gaps = np.abs(np.abs(point) - self.half_extents)
        faces = np.flatnonzero(gaps <= SURFACE_TOLERANCE)
        if len(faces) != 1:
            raise SurfacePropertyError("Point lies on an edge or corner of the box.")
        axis = int(faces[0])
        normal = np.zeros(3)
        normal[axis] = np.sign(point[axis])
        others = [i for i in range(3) if i != axis]
        dir_1, dir_2 = np.zeros(3), np.zeros(3)
        dir_1[others[0]] = 1.0
        dir_2[others[1]] = 1.0
        return SurfaceProperties(normal, dir_1, dir_2, 0.0, 0.0)

    def to_dict(self):
        return {"type": "box", "size": list(self.size), "color": list(self.color)}


@dataclass(frozen=True, kw_only=True)
class Torus(SceneObject):
    """Torus around the local z axis."""

    major_radius: float
    minor_radius: float

    def __post_init__(self):
        if not 0 < self.minor_radius < self.major_radius:
            raise ConfigError("Valid torus radii satisfy 0 < minor_radius < major_radius")

    def _quartic(self, origins, directions):
        big, small = self.major_radius, self.minor_radius
        f = np.einsum("ij,ij->i", origins, directions)
        oo = np.einsum("ij,ij->i", origins, origins)
        g = oo + big**2 - small**2
        oz, dz = origins[:, 2], directions[:, 2]
        return np.stack(
            [
                np.ones_like(f),
                4 * f,
                4 * f**2 + 2 * g - 4 * big**2 * (1 - dz**2),
                4 * f * g - 8 * big**2 * (f - oz * dz),
                g**2 - 4 * big**2 * (oo - oz**2),
            ],
            axis=1,
        )

    def intersect(self, origins, directions):
        count = len(origins)
        distance = np.full(count, np.inf)
        candidates = np.flatnonzero(
            np.isfinite(
                _sphere_distances(origins, directions, np.zeros(3), self.major_radius + self.minor_radius)
            )
            | (np.linalg.norm(origins, axis=1) <= self.major_radius + self.minor_radius)
        )
        if len(candidates):
            coefficients = self._quartic(origins[candidates], directions[candidates])
            companion = np.zeros((len(candidates), 4, 4))
            companion[:, 0, :] = -coefficients[:, 1:]
            companion[:, 1, 0] = companion[:, 2, 1] = companion[:, 3, 2] = 1.0
            roots = np.linalg.eigvals(companion)
            real = roots.real
            real = np.where(np.abs(roots.imag) <= 1e-6 * (1 + np.abs(real)), real, np.nan)
            # polish with Newton iterations, eigenvalues of the companion matrix are not exact
            for _ in range(3):
                value = np.zeros_like(real)
                slope = np.zeros_like(real)
                for power, column in enumerate(coefficients.T):
                    degree = 4 - power
                    value = value + column[:, None] * real**degree
                    if degree:
                        slope = slope + degree * column[:, None] * real ** (degree - 1)
                with np.errstate(divide="ignore", invalid="ignore"):
                    step = np.where(slope != 0, value / slope, 0.0)
                real = real - step
            with np.errstate(invalid="ignore"):
                distance[candidates] = _first_positive(*real.T)
        points = origins + np.where(np.isfinite(distance), distance, 0.0)[:, None] * directions
        normals = self._normals(points)
        return RayHits(distance, normals, self._colors(count))

    def _normals(self, points):
        rho = np.linalg.norm(points[:, :2], axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            ring = np.zeros_like(points)
            ring[:, :2] = points[:, :2] / np.where(rho > 0, rho, 1.0)[:, None] * self.major_radius
            normals = points - ring
            norms = np.linalg.norm(normals, axis=1)
            return normals / np.where(norms > 0, norms, 1.0)[:, None]

    def signed_distance(self, points):
        points = np.atleast_2d(points)
        q = np.stack([np.linalg.norm(points[:, :2], axis=1) - self.major_radius, points[:, 2]], axis=1)
        return np.linalg.norm(q, axis=1) - self.minor_radius

    def _surface_properties(self, point):
        rho = np.linalg.norm(point[:2])
        radial = np.array([point[0], point[1], 0.0]) / rho
        normal = self._normals(point[None, :])[0]
        parallel = np.cross(np.array([0.0, 0.0, 1.0]), radial)
        meridian = np.cross(normal, parallel)
        cos_phi = float(np.dot(normal, radial))
        k_parallel = cos_phi / (self.major_radius + self.minor_radius * cos_phi)
        return SurfaceProperties(normal, meridian, parallel, 1.0 / self.minor_radius, k_parallel)

    def to_dict(self):
        return {
            "type": "torus",
            "major_radius": self.major_radius,
            "minor_radius": self.minor_radius,
            "color": list(self.color),
        }


@dataclass(frozen=True)
class Part:
    shape: SceneObject
    pose: Pose
    color: tuple[float, float, float, float] | None = None

    def to_local(self, origins: FloatArray, directions: FloatArray | None = None):
        rotation_t = self.pose.orientation.matrix.T
        local_origins = (origins - self.pose.position) @ rotation_t.T
        if directions is None:
            return local_origins
        return local_origins, directions @ rotation_t.T


@dataclass(frozen=True, kw_only=True)
class Composite(SceneObject):
    """Union of posed parts, each with its own color."""

    parts: tuple[Part, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.parts:
            raise ConfigError("A composite object needs at least one part")

    def intersect(self, origins, directions):
        hits = RayHits.misses(len(origins))
        for part in self.parts:
            local_origins, local_directions = part.to_local(origins, directions)
            part_hits = part.shape.intersect(local_origins, local_directions)
            colors = part_hits.colors
            if part.color is not None:
                colors = np.tile(np.asarray(part.color, dtype=np.float64), (len(origins), 1))
            hits = hits.merge(
                RayHits(part_hits.distance, part_hits.normals @ part.pose.orientation.matrix.T, colors)
            )
        return hits

    def signed_distance(self, points):
        points = np.atleast_2d(points)
        return np.min([part.shape.signed_distance(part.to_local(points)) for part in self.parts], axis=0)

    def _surface_properties(self, point):
        part = self.parts[int(self.part_index(point)[0])]
        local = part.to_local(point[None, :])[0]
        return part.shape.surface_properties(local).transformed(part.pose.orientation)

    def part_index(self, points: FloatArray) -> npt.NDArray[np.intp]:
        """Index of the part whose surface is closest to each point."""
        points = np.atleast_2d(points)
        distances = np.stack(
            [np.abs(part.shape.signed_distance(part.to_local(points))) for part in self.parts]
        )
        return np.argmin(distances, axis=0)

    def to_dict(self):
        return {
            "type": "composite",
            "color": list(self.color),
            "parts": [
                {
                    "shape": part.shape.to_dict(),
                    "location": list(part.pose.location),
                    "quat": list(part.pose.orientation.quat),
                    "color": None if part.color is None else list(part.color),
                }
                for part in self.parts
            ],
        }


@dataclass(frozen=True, kw_only=True, eq=False)
class Mesh(SceneObject):
    """Triangle mesh with optional per-vertex colors. Only ray casting is supported."""

    vertices: FloatArray
    faces: npt.NDArray[np.intp]
    vertex_colors: FloatArray | None = None
    source: str | None = None
    chunk_size: int = 512

    __eq__ = object.__eq__
    __hash__ = object.__hash__

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.intp)
        if vertices.ndim != 2 or vertices.shape[1] != 3 or faces.ndim != 2 or faces.shape[1] != 3:
            raise ConfigError("A mesh needs (V, 3) vertices and (F, 3) faces")
        if len(faces) == 0 or faces.min() < 0 or faces.max() >= len(vertices):
            raise ConfigError("Mesh faces reference missing vertices")
        triangles = vertices[faces]
        edges_1, edges_2 = triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0]
        areas = np.linalg.norm(np.cross(edges_1, edges_2), axis=1)
        if np.any(areas <= 0):
            raise ConfigError("Mesh contains degenerate triangles")

    @property
    def triangles(self) -> FloatArray:
        return np.asarray(self.vertices, dtype=np.float64)[np.asarray(self.faces)]

    def intersect(self, origins, directions):
        triangles = self.triangles
        v0 = triangles[:, 0]
        edge_1 = triangles[:, 1] - v0
        edge_2 = triangles[:, 2] - v0
        face_normals = np.cross(edge_1, edge_2)
        face_normals /= np.linalg.norm(face_normals, axis=1, keepdims=True)
        count = len(origins)
        distance = np.full(count, np.inf)
        face = np.zeros(count, dtype=np.intp)
        bary = np.zeros((count, 2))
        for start in range(0, count, self.chunk_size):
            chunk = slice(start, start + self.chunk_size)
            d = directions[chunk][:, None, :]
            o = origins[chunk][:, None, :]
            p = np.cross(d, edge_2[None])
            det = np.einsum("rfk,fk->rf", p, edge_1)
            with np.errstate(divide="ignore", invalid="ignore"):
                inverse = 1.0 / det
                s = o - v0[None]
                u = np.einsum("rfk,rfk->rf", s, p) * inverse
                q = np.cross(s, edge_1[None])
                v = np.einsum("rfk,rfk->rf", np.broadcast_to(d, q.shape), q) * inverse
                t = np.einsum("fk,rfk->rf", edge_2, q) * inverse
            valid = (np.abs(det) > 1e-15) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > RAY_EPSILON)
            t = np.where(valid, t, np.inf)
            best = np.argmin(t, axis=1)
            rows = np.arange(t.shape[0])
            distance[chunk] = t[rows, best]
            face[chunk] = best
            bary[chunk] = np.stack([u[rows, best], v[rows, best]], axis=1)
        normals = face_normals[face]
        # face the incoming ray, meshes need not be consistently oriented
        flip = np.einsum("ij,ij->i", normals, directions) > 0
        normals[flip] *= -1
        return RayHits(distance, normals, self._vertex_colors(face, bary))

    def _vertex_colors(self, face: npt.NDArray[np.intp], bary: FloatArray) -> FloatArray:
        if self.vertex_colors is None:
            return self._colors(len(face))
        corner_colors = np.asarray(self.vertex_colors, dtype=np.float64)[np.asarray(self.faces)[face]]
        weights = np.stack([1 - bary[:, 0] - bary[:, 1], bary[:, 0], bary[:, 1]], axis=1)
        return np.einsum("rc,rck->rk", weights, corner_colors)

    def signed_distance(self, points):
        raise SurfacePropertyError("Signed distances are not available for mesh objects.")

    def surface_properties(self, point):
        raise SurfacePropertyError("Analytic surface properties are not available for mesh objects.")

    def _surface_properties(self, point):
        raise SurfacePropertyError("Analytic surface properties are not available for mesh objects.")

    def to_dict(self):
        if self.source is not None:
            return {"type": "mesh", "obj": self.source, "color": list(self.color)}
        return {
            "type": "mesh",
            "vertices": np.asarray(self.vertices).tolist(),
            "faces": np.asarray(self.faces).tolist(),
            "vertex_colors": None if self.vertex_colors is None else np.asarray(self.vertex_colors).tolist(),
            "color": list(self.color),
        }


def load_obj(path: str | Path, color: tuple[float, float, float, float] = DEFAULT_COLOR) -> Mesh:
    """Load an OBJ triangle mesh. Vertex colors (`v x y z r g b`) are kept, materials are ignored."""
    vertices: list[list[float]] = []
    colors: list[list[float]] = []
    faces: list[list[int]] = []
    for line_number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        fields = line.split("#", 1)[0].split()
        if not fields:
            continue
        try:
            if fields[0] == "v":
                vertices.append([float(v) for v in fields[1:4]])
                rgb = [float(v) for v in fields[4:7]]
                colors.append([*rgb, 1.0] if len(rgb) == 3 else list(color))
            elif fields[0] == "f":
                indices = [int(item.split("/")[0]) for item in fields[1:]]
                indices = [i - 1 if i > 0 else len(vertices) + i for i in indices]
                # triangulate polygons as fans
                faces.extend([indices[0], indices[k], indices[k + 1]] for k in range(1, len(indices) - 1))
        except ValueError as e:
            raise SchemaError(f"{path}:{line_number}: cannot parse {line!r}") from e
    has_colors = any(c != list(color) for c in colors)
    logger.debug(f"Loaded {len(vertices)} vertices and {len(faces)} faces from {path}")
    return Mesh(
        vertices=np.array(vertices, dtype=np.float64),
        faces=np.array(faces, dtype=np.intp),
        vertex_colors=np.array(colors) if has_colors else None,
        color=color,
        source=str(path),
    )


def shape_from_dict(data: dict[str, Any], base_dir: Path | None = None) -> SceneObject:
    kind = data.get("type")
    color = tuple(data.get("color", DEFAULT_COLOR))
    if kind == "sphere":
        return Sphere(radius=data["radius"], color=color)
    if kind == "cylinder":
        return Cylinder(radius=data["radius"], height=data["height"], color=color)
    if kind == "capsule":
        return Capsule(radius=data["radius"], height=data["height"], color=color)
    if kind == "box":
        return Box(size=tuple(data["size"]), color=color)
    if kind == "torus":
        return Torus(major_radius=data["major_radius"], minor_radius=data["minor_radius"], color=color)
    if kind == "composite":
        parts = tuple(
            Part(
                shape=shape_from_dict(part["shape"], base_dir),
                pose=Pose(
                    as_tuple(part.get("location", (0, 0, 0))),
                    Rotation.from_quat(part.get("quat", (0, 0, 0, 1))),
                ),
                color=None if part.get("color") is None else tuple(part["color"]),
            )
            for part in data["parts"]
        )
        return Composite(parts=parts, color=color)
    if kind == "mesh":
        if "obj" in data:
            path = Path(data["obj"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return load_obj(path, color=color)
        colors = data.get("vertex_colors")
        return Mesh(
            vertices=np.array(data["vertices"], dtype=np.float64),
            faces=np.array(data["faces"], dtype=np.intp),
            vertex_colors=None if colors is None else np.array(colors, dtype=np.float64),
            color=color,
        )
    raise SchemaError(f"Unknown shape type {kind!r}")
