from __future__ import annotations

import math

import numpy as np
import pytest

from evidence_recognizer.cmp import validate
from evidence_recognizer.environment.agent import look_rotation
from evidence_recognizer.environment.scene import Patch, Scene, analytic_surface_properties, sense_patch
from evidence_recognizer.environment.shapes import Box, Cylinder, Sphere
from evidence_recognizer.exceptions import ConfigError, InsufficientPointsError
from evidence_recognizer.geometry import Pose
from evidence_recognizer.sensor_module import (
    SensorConfig,
    SensorModule,
    add_depth_noise,
    estimate_point_normal,
    estimate_principal_curvatures,
    to_cmp,
)


def _patch_of(shape, distance: float, resolution=(16, 16)) -> Patch:
    """A patch looking along +y at the object origin from `distance` away."""
    position = np.array([0.0, -distance, 0.0])
    pose = Pose.create(position, look_rotation(-position))
    return sense_patch(Scene.single(shape, "object"), pose, resolution=resolution, zoom=10.0)


def _angle(a, b) -> float:
    return math.degrees(math.acos(np.clip(abs(np.dot(a, b)) / np.linalg.norm(a) / np.linalg.norm(b), -1, 1)))


def test_sphere_normal_and_curvature():
    sphere = Sphere(radius=0.1)
    # the patch spans about 1 cm on the surface
    patch = _patch_of(sphere, 0.164)
    assert patch.on_object.all()
    expected = analytic_surface_properties(sphere, patch.center_location)

    normal = estimate_point_normal(patch)
    assert _angle(normal, expected.normal) < 2.0
    assert np.dot(normal, expected.normal) > 0

    curvature = estimate_principal_curvatures(patch, normal)
    assert curvature.k1 == pytest.approx(expected.k1, rel=0.05)
    assert curvature.k2 == pytest.approx(expected.k2, rel=0.05)
    assert curvature.degenerate


def test_cylinder_curvature():
    cylinder = Cylinder(radius=0.05, height=0.3)
    patch = _patch_of(cylinder, 0.114)
    expected = analytic_surface_properties(cylinder, patch.center_location)
    normal = estimate_point_normal(patch)
    assert _angle(normal, expected.normal) < 2.0

    curvature = estimate_principal_curvatures(patch, normal)
    assert curvature.k1 == pytest.approx(20.0, rel=0.05)
    assert abs(curvature.k2) < 1.0
    assert not curvature.degenerate
    assert curvature.k1 >= curvature.k2
    # max curvature runs around the cylinder, min curvature along its axis
    assert _angle(curvature.dir_1, expected.dir_1) < 5.0
    assert _angle(curvature.dir_2, (0.0, 0.0, 1.0)) < 5.0
    assert abs(np.dot(curvature.dir_1, curvature.dir_2)) < 1e-6


def test_plane_is_exact_and_degenerate():
    patch = _patch_of(Box(size=(0.2, 0.2, 0.2)), 0.164)
    normal = estimate_point_normal(patch)
    np.testing.assert_allclose(normal, (0.0, -1.0, 0.0), atol=1e-9)
    curvature = estimate_principal_curvatures(patch, normal)
    assert abs(curvature.k1) < 1e-6
    assert abs(curvature.k2) < 1e-6
    assert curvature.degenerate


def test_too_few_points():
    on_object = np.zeros((5, 5), dtype=bool)
    on_object[0, :3] = True
    patch = Patch(
        locations=np.zeros((5, 5, 3)),
        colors=np.zeros((5, 5, 4)),
        on_object=on_object,
        depths=np.ones((5, 5)),
        ray_directions=np.zeros((5, 5, 3)),
        sensor_pose=Pose.create((0.0, 0.0, 0.0)),
        zoom=1.0,
    )
    with pytest.raises(InsufficientPointsError):
        estimate_point_normal(patch)


def test_to_cmp_builds_a_valid_message():
    cylinder = Cylinder(radius=0.05, height=0.3, color=(0.9, 0.5, 0.1, 1.0))
    msg = to_cmp(_patch_of(cylinder, 0.114), None, sender_id="patch_0")
    assert msg.use_state
    assert validate(msg) == []
    assert msg.morphological_features.is_orthonormal()
    assert msg.non_morphological_features["rgba"] == (0.9, 0.5, 0.1, 1.0)
    assert msg.non_morphological_features["curvature_degenerate"] == (0.0,)
    assert 0.0 < msg.confidence <= 1.0
    assert msg.sender_id == "patch_0"
    np.testing.assert_allclose(msg.location, (0.0, -0.05, 0.0), atol=1e-12)


def test_to_cmp_off_object():
    pose = Pose.create((0.0, -0.15, 0.0), look_rotation((0.0, -1.0, 0.0)))
    patch = sense_patch(Scene.single(Sphere(radius=0.04), "sphere"), pose)
    msg = to_cmp(patch, None)
    assert not msg.use_state
    assert msg.confidence == 0.0
    assert validate(msg) == []


def test_identical_patches_are_gated():
    module = SensorModule(sensor_id="patch")
    patch = _patch_of(Sphere(radius=0.1), 0.164)
    first = module.step(patch)
    second = module.step(patch)
    assert first.use_state
    assert not second.use_state
    assert second.location == first.location


def test_repeated_sensing_is_identical():
    patch = _patch_of(Sphere(radius=0.1), 0.164)
    assert to_cmp(patch, None) == to_cmp(patch, None)


def test_depth_noise_requires_a_generator():
    with pytest.raises(ConfigError):
        SensorModule(sensor_id="patch", config=SensorConfig(depth_noise_std=0.001))
    with pytest.raises(ConfigError):
        SensorModule(sensor_id="")
    with pytest.raises(ConfigError):
        SensorConfig(degeneracy_ratio=1.5)


def test_depth_noise_only_moves_on_object_pixels(rng):
    pose = Pose.create((0.0, -0.15, 0.0), look_rotation((0.0, 1.0, 0.0)))
    patch = sense_patch(Scene.single(Sphere(radius=0.04), "sphere"), pose, zoom=1.5)
    assert patch.on_object.any() and not patch.on_object.all()
    noisy = add_depth_noise(patch, 0.001, rng)
    np.testing.assert_array_equal(noisy.depths[~patch.on_object], patch.depths[~patch.on_object])
    assert np.any(noisy.depths[patch.on_object] != patch.depths[patch.on_object])
    # points stay on their rays
    offsets = noisy.locations - pose.position
    np.testing.assert_allclose(offsets / noisy.depths[..., None], patch.ray_directions, atol=1e-12)
