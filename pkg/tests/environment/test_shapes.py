from __future__ import annotations

import numpy as np
import pytest

from evidence_recognizer.environment.scene import BLUE, RED, two_tone_cylinder
from evidence_recognizer.environment.shapes import (
    Box,
    Capsule,
    Cylinder,
    Mesh,
    Sphere,
    Torus,
    load_obj,
    shape_from_dict,
)
from evidence_recognizer.exceptions import ConfigError, SchemaError, SurfacePropertyError


def _cast(shape, origin, direction):
    return shape.intersect(np.array([origin], dtype=float), np.array([direction], dtype=float))


@pytest.mark.parametrize(
    "shape, origin, direction, distance, normal",
    [
        (Sphere(radius=0.04), (0, -1, 0), (0, 1, 0), 0.96, (0, -1, 0)),
        (Cylinder(radius=0.035, height=0.09), (0, -1, 0), (0, 1, 0), 0.965, (0, -1, 0)),
        (Cylinder(radius=0.035, height=0.09), (0, 0, 1), (0, 0, -1), 0.955, (0, 0, 1)),
        (Capsule(radius=0.03, height=0.06), (0, 0, 1), (0, 0, -1), 0.94, (0, 0, 1)),
        (Box(size=(0.1, 0.07, 0.025)), (-1, 0, 0), (1, 0, 0), 0.95, (-1, 0, 0)),
        (Torus(major_radius=0.035, minor_radius=0.015), (0.035, 0, 1), (0, 0, -1), 0.985, (0, 0, 1)),
    ],
)
def test_ray_hits(shape, origin, direction, distance, normal):
    hits = _cast(shape, origin, direction)
    assert hits.distance[0] == pytest.approx(distance, abs=1e-9)
    np.testing.assert_allclose(hits.normals[0], normal, atol=1e-9)


def test_ray_through_the_torus_hole_misses():
    hits = _cast(Torus(major_radius=0.035, minor_radius=0.015), (0, 0, 1), (0, 0, -1))
    assert not hits.hit[0]


def test_ray_starting_inside_hits_from_within():
    hits = _cast(Sphere(radius=0.04), (0, 0, 0), (1, 0, 0))
    assert hits.distance[0] == pytest.approx(0.04)


def test_signed_distance_sign():
    sphere = Sphere(radius=0.04)
    np.testing.assert_allclose(sphere.signed_distance(np.array([[0, 0, 0], [0.1, 0, 0]])), [-0.04, 0.06])
    box = Box(size=(0.2, 0.2, 0.2))
    assert box.signed_distance(np.array([[0.0, 0.0, 0.0]]))[0] == pytest.approx(-0.1)


def test_surface_properties_of_primitives():
    props = Cylinder(radius=0.05, height=0.2).surface_properties(np.array([0.05, 0.0, 0.0]))
    np.testing.assert_allclose(props.normal, (1, 0, 0))
    assert props.k1 == pytest.approx(20.0)
    assert props.k2 == 0.0
    torus = Torus(major_radius=0.035, minor_radius=0.015)
    outer = torus.surface_properties(np.array([0.05, 0.0, 0.0]))
    assert outer.k1 == pytest.approx(1 / 0.015)
    assert outer.k2 == pytest.approx(1 / 0.05)
    with pytest.raises(SurfacePropertyError):
        Sphere(radius=0.04).surface_properties(np.array([0.1, 0.0, 0.0]))
    with pytest.raises(SurfacePropertyError):
        Box(size=(0.2, 0.2, 0.2)).surface_properties(np.array([0.1, 0.1, 0.0]))


def test_composite_part_colors():
    shape = two_tone_cylinder()
    origins = np.array([[0, -1, 0.02], [0, -1, -0.02]], dtype=float)
    hits = shape.intersect(origins, np.array([[0, 1, 0], [0, 1, 0]], dtype=float))
    np.testing.assert_allclose(hits.colors, [RED, BLUE])
    np.testing.assert_allclose(hits.distance, [0.965, 0.965])


def test_invalid_parameters():
    with pytest.raises(ConfigError):
        Sphere(radius=0.0)
    with pytest.raises(ConfigError):
        Torus(major_radius=0.01, minor_radius=0.02)
    with pytest.raises(ConfigError):
        Box(size=(0.1, 0.1))
    with pytest.raises(ConfigError):
        Mesh(vertices=np.zeros((3, 3)), faces=np.array([[0, 1, 2]]))


def test_shape_dict_round_trip():
    for shape in (Sphere(radius=0.04), Torus(major_radius=0.035, minor_radius=0.015), two_tone_cylinder()):
        assert shape_from_dict(shape.to_dict()) == shape
    with pytest.raises(SchemaError):
        shape_from_dict({"type": "teapot"})


def test_load_obj(tmp_path):
    path = tmp_path / "square.obj"
    path.write_text(
        "# unit square in the xz plane\n"
        "v -0.5 0 -0.5 1 0 0\n"
        "v 0.5 0 -0.5 1 0 0\n"
        "v 0.5 0 0.5 0 0 1\n"
        "v -0.5 0 0.5 0 0 1\n"
        "f 1 2 3 4\n"
    )
    mesh = load_obj(path)
    assert len(mesh.faces) == 2
    hits = _cast(mesh, (0, -1, 0.25), (0, 1, 0))
    assert hits.distance[0] == pytest.approx(1.0)
    np.testing.assert_allclose(hits.normals[0], (0, -1, 0), atol=1e-12)
    # colors interpolate between the red bottom and the blue top edge
    np.testing.assert_allclose(hits.colors[0], (0.25, 0.0, 0.75, 1.0), atol=1e-12)
    assert shape_from_dict(mesh.to_dict(), tmp_path).source == str(path)


def test_load_obj_reports_the_bad_line(tmp_path):
    path = tmp_path / "broken.obj"
    path.write_text("v 0 0 0\nv 1 zero 0\n")
    with pytest.raises(SchemaError, match="broken.obj:2"):
        load_obj(path)


def _uv_sphere(radius: float = 0.05, rings: int = 10, segments: int = 20) -> Mesh:
    polar = np.linspace(0.0, np.pi, rings + 1)[1:-1]
    around = 2 * np.pi * np.arange(segments) / segments
    ring_vertices = radius * np.stack(
        [
            np.outer(np.sin(polar), np.cos(around)),
            np.outer(np.sin(polar), np.sin(around)),
            np.outer(np.cos(polar), np.ones(segments)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    vertices = np.vstack([[0.0, 0.0, radius], ring_vertices, [0.0, 0.0, -radius]])
    bottom = len(vertices) - 1

    def vertex(ring: int, index: int) -> int:
        return 1 + ring * segments + index % segments

    faces = [(0, vertex(0, j), vertex(0, j + 1)) for j in range(segments)]
    for i in range(rings - 2):
        for j in range(segments):
            faces.append((vertex(i, j), vertex(i + 1, j), vertex(i + 1, j + 1)))
            faces.append((vertex(i, j), vertex(i + 1, j + 1), vertex(i, j + 1)))
    faces += [(vertex(rings - 2, j), bottom, vertex(rings - 2, j + 1)) for j in range(segments)]
    return Mesh(vertices=vertices, faces=np.array(faces))


def _nearest_hits_per_triangle(mesh: Mesh, origins, directions):
    """Nearest hit distance of every ray, testing one triangle at a time."""
    nearest = np.full(len(origins), np.inf)
    for a, b, c in mesh.triangles:
        edge_1, edge_2 = b - a, c - a
        p = np.cross(directions, edge_2)
        det = p @ edge_1
        with np.errstate(divide="ignore", invalid="ignore"):
            s = origins - a
            u = np.einsum("ij,ij->i", s, p) / det
            q = np.cross(s, edge_1)
            v = np.einsum("ij,ij->i", directions, q) / det
            t = (q @ edge_2) / det
        hit = (np.abs(det) > 1e-15) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-9)
        nearest = np.where(hit & (t < nearest), t, nearest)
    return nearest


def test_mesh_hits_match_a_per_triangle_scan():
    rng = np.random.default_rng(3)
    mesh = _uv_sphere()
    count = 10_000
    origins = rng.normal(size=(count, 3))
    origins *= 0.2 / np.linalg.norm(origins, axis=1, keepdims=True)
    targets = rng.uniform(-0.06, 0.06, size=(count, 3))
    directions = targets - origins
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    hits = mesh.intersect(origins, directions)
    expected = _nearest_hits_per_triangle(mesh, origins, directions)
    np.testing.assert_array_equal(hits.hit, np.isfinite(expected))
    np.testing.assert_allclose(hits.distance[hits.hit], expected[hits.hit], rtol=0, atol=1e-12)
    assert 0.2 < hits.hit.mean() < 0.95

    # the inscribed mesh lies between the sphere and the sphere shrunk by the largest facet sagitta
    points = origins[hits.hit] + hits.distance[hits.hit, None] * directions[hits.hit]
    radii = np.linalg.norm(points, axis=1)
    assert np.all(radii <= 0.05 + 1e-12)
    assert np.all(radii >= 0.05 * np.cos(np.pi / 10))
    # normals face the incoming rays
    assert np.all(np.einsum("ij,ij->i", hits.normals[hits.hit], directions[hits.hit]) < 0)
