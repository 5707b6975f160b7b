from __future__ import annotations

import json

import numpy as np
import pytest

from evidence_recognizer.environment.agent import look_rotation
from evidence_recognizer.environment.scene import (
    Scene,
    default_objects,
    load_scene,
    pixel_directions,
    ray_cast,
    sense_patch,
)
from evidence_recognizer.environment.shapes import Box, Sphere
from evidence_recognizer.exceptions import ConfigError, SchemaError
from evidence_recognizer.geometry import Pose, Rotation


def test_ray_cast_hit_and_miss(sphere_scene):
    hit = ray_cast(sphere_scene, (0.0, -0.15, 0.0), (0.0, 1.0, 0.0))
    assert hit is not None
    assert hit.distance == pytest.approx(0.11)
    assert hit.object_ref == "sphere"
    np.testing.assert_allclose(hit.normal, (0.0, -1.0, 0.0), atol=1e-12)
    np.testing.assert_allclose(hit.location, (0.0, -0.04, 0.0), atol=1e-12)
    assert hit.part_color == (0.2, 0.7, 0.2, 1.0)

    assert ray_cast(sphere_scene, (0.0, -0.15, 0.0), (0.0, -1.0, 0.0)) is None


def test_ray_cast_picks_the_nearest_instance():
    scene = Scene(
        (
            *Scene.single(Sphere(radius=0.04), "far", Pose.create((0.0, 0.2, 0.0))).instances,
            *Scene.single(Sphere(radius=0.04), "near").instances,
        )
    )
    hit = ray_cast(scene, (0.0, -1.0, 0.0), (0.0, 1.0, 0.0))
    assert hit.object_ref == "near"
    assert hit.distance == pytest.approx(0.96)


def test_posed_instances():
    shifted = Scene.single(Sphere(radius=0.04), "sphere", Pose.create((0.1, 0.0, 0.0)))
    hit = ray_cast(shifted, (0.1, -1.0, 0.0), (0.0, 1.0, 0.0))
    np.testing.assert_allclose(hit.location, (0.1, -0.04, 0.0), atol=1e-12)

    # a long thin box turned to lie along y
    pose = Pose.create((0.0, 0.0, 0.0), Rotation.from_euler("z", 90.0))
    turned = Scene.single(Box(size=(0.2, 0.02, 0.02)), "bar", pose)
    hit = ray_cast(turned, (-1.0, 0.09, 0.0), (1.0, 0.0, 0.0))
    assert hit is not None
    assert hit.distance == pytest.approx(0.99)
    np.testing.assert_allclose(hit.normal, (-1.0, 0.0, 0.0), atol=1e-9)
    assert ray_cast(turned, (0.09, -1.0, 0.0), (0.0, 1.0, 0.0)) is None


def test_scene_signed_distance(sphere_scene):
    distances = sphere_scene.signed_distance([[0.0, 0.0, 0.0], [0.0, 0.1, 0.0]])
    np.testing.assert_allclose(distances, [-0.04, 0.06])


def test_scene_dict_round_trip():
    scene = Scene.single(Sphere(radius=0.04), "sphere", Pose.create((0.0, 0.1, 0.0)))
    assert Scene.from_dict(json.loads(json.dumps(scene.to_dict()))) == scene


def test_scene_from_dict_accepts_euler_angles():
    scene = Scene.from_dict(
        {"objects": [{"label": "bar", "shape": {"type": "sphere", "radius": 0.04}, "rotation": [0, 0, 90]}]}
    )
    assert scene.instances[0].pose.orientation.angle_to(Rotation.from_euler("z", 90.0)) < 1e-9


@pytest.mark.parametrize(
    "data",
    [
        {"objects": [{"label": "x", "shape": {"type": "teapot"}}]},
        {"objects": [{"shape": {"type": "sphere", "radius": 0.04}}]},
        {"items": []},
    ],
)
def test_scene_schema_errors(data):
    with pytest.raises(SchemaError):
        Scene.from_dict(data)


def test_load_scene(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps({"objects": [{"label": "ball", "shape": {"type": "sphere", "radius": 0.05}}]}))
    scene = load_scene(path)
    assert scene.instances[0].ground_truth_label == "ball"

    path.write_text("{objects")
    with pytest.raises(SchemaError):
        load_scene(path)


def test_pixel_directions():
    pose = Pose.create((0.0, -0.15, 0.0), look_rotation((0.3, 1.0, 0.2)))
    directions = pixel_directions(pose, (16, 16), zoom=10.0)
    assert directions.shape == (16, 16, 3)
    np.testing.assert_allclose(np.linalg.norm(directions, axis=-1), 1.0)
    np.testing.assert_allclose(directions[8, 8], pose.look_direction, atol=1e-12)


def test_sense_patch(sphere_scene):
    pose = Pose.create((0.0, -0.15, 0.0), look_rotation((0.0, 1.0, 0.0)))
    patch = sense_patch(sphere_scene, pose)
    assert patch.resolution == (16, 16)
    assert patch.center_on_object
    assert patch.on_object_fraction == 1.0
    np.testing.assert_allclose(patch.center_location, (0.0, -0.04, 0.0), atol=1e-12)
    np.testing.assert_allclose(patch.center_color, (0.2, 0.7, 0.2, 1.0))

    away = sense_patch(sphere_scene, Pose.create((0.0, -0.15, 0.0), look_rotation((0.0, -1.0, 0.0))))
    assert not away.on_object.any()


def test_sense_patch_rejects_bad_parameters(sphere_scene):
    pose = Pose.create((0.0, -0.15, 0.0), look_rotation((0.0, 1.0, 0.0)))
    with pytest.raises(ConfigError):
        sense_patch(sphere_scene, pose, resolution=(4, 16))
    with pytest.raises(ConfigError):
        sense_patch(sphere_scene, pose, zoom=0.0)


def test_default_objects():
    objects = default_objects()
    assert len(objects) == 8
    assert {"sphere", "cube", "mug", "two_tone_cylinder"} <= set(objects)
