from __future__ import annotations

import json

import numpy as np
import pytest

from evidence_recognizer.exceptions import EmptyBufferError, InvalidFrameError, MissingModelError, SchemaError
from evidence_recognizer.geometry import Pose, Rotation, SurfaceFrame
from evidence_recognizer.learning_module.config import LMConfig
from evidence_recognizer.learning_module.graph import (
    BufferEntry,
    GraphMemory,
    GraphNode,
    ObjectModel,
    build_graph,
    update_graph,
)
from tests.conftest import line_model, make_message


def _buffer(*messages):
    return [BufferEntry(msg) for msg in messages]


def test_build_graph_uses_only_used_observations():
    buffer = _buffer(
        make_message((0.0, 0.0, 0.0)),
        make_message((0.01, 0.0, 0.0), use_state=False),
        make_message((0.02, 0.0, 0.0)),
    )
    model = build_graph(buffer, LMConfig(), "new_object_0")
    assert len(model) == 2
    assert model.edges == [(0, 1)]
    np.testing.assert_allclose(model.locations, [[0.0, 0.0, 0.0], [0.02, 0.0, 0.0]])


def test_build_graph_skips_duplicates():
    config = LMConfig()
    same = _buffer(make_message((0.0, 0.0, 0.0)), make_message((0.001, 0.0, 0.0)))
    assert len(build_graph(same, config, "a")) == 1
    # a different color at the same spot is a new node
    red = make_message((0.001, 0.0, 0.0), rgba=(1.0, 0.0, 0.0, 1.0))
    recolored = _buffer(make_message((0.0, 0.0, 0.0)), red)
    assert len(build_graph(recolored, config, "a")) == 2


def test_build_graph_needs_observations():
    with pytest.raises(EmptyBufferError):
        build_graph([], LMConfig(), "a")
    with pytest.raises(EmptyBufferError):
        build_graph(_buffer(make_message(use_state=False)), LMConfig(), "a")


def test_update_graph_maps_into_the_model_frame():
    model = line_model()
    pose = Pose.create((0.1, 0.0, 0.0), Rotation.from_euler("z", 90.0))
    # the model point (0.07, 0, 0) with its frame, seen in the body frame
    msg = make_message((0.1, 0.07, 0.0), normal=(0.0, 0.0, 1.0), dir_1=(0.0, 1.0, 0.0))
    updated = update_graph(model, _buffer(msg), pose, LMConfig())
    assert len(model) == 4
    assert len(updated) == 5
    node = updated.nodes[-1]
    np.testing.assert_allclose(node.location, (0.07, 0.0, 0.0), atol=1e-12)
    np.testing.assert_allclose(node.frame.curvature_dir_1, (1.0, 0.0, 0.0), atol=1e-12)
    np.testing.assert_allclose(node.frame.point_normal, (0.0, 0.0, 1.0), atol=1e-12)


def test_update_graph_rejects_invalid_poses():
    bad = Pose((float("nan"), 0.0, 0.0), Rotation.identity())
    with pytest.raises(InvalidFrameError):
        update_graph(line_model(), _buffer(make_message()), bad, LMConfig())


def test_nodes_need_orthonormal_frames():
    with pytest.raises(InvalidFrameError):
        GraphNode((0.0, 0.0, 0.0), SurfaceFrame((0.0, 0.0, 1.0), (1.0, 0.0, 0.1), (0.0, 1.0, 0.0)))


def test_query_radius():
    points = np.array([[0.01, 0.0, 0.0], [1.0, 0.0, 0.0]])
    counts, point_index, node_index = line_model().query_radius(points, 0.011)
    assert counts.tolist() == [2, 0]
    assert point_index.tolist() == [0, 0]
    assert sorted(node_index.tolist()) == [0, 1]

    counts, _, node_index = ObjectModel("empty").query_radius(np.zeros((1, 3)), 0.01)
    assert counts.tolist() == [0]
    assert len(node_index) == 0


def test_model_dict_round_trip():
    model = line_model()
    model.edges = [(0, 1), (1, 2)]
    restored = ObjectModel.from_dict(json.loads(json.dumps(model.to_dict())))
    assert restored.to_dict() == model.to_dict()

    data = model.to_dict()
    data["edges"].append([3, 9])
    with pytest.raises(SchemaError):
        ObjectModel.from_dict(data)


def test_memory_ids_and_lookup():
    memory = GraphMemory()
    assert memory.new_object_id() == "new_object_0"
    memory.put(ObjectModel("new_object_0", line_model().nodes))
    assert memory.new_object_id() == "new_object_1"
    assert "new_object_0" in memory
    assert list(memory) == ["new_object_0"]
    with pytest.raises(MissingModelError):
        memory.get("mug")


def test_memory_keeps_the_first_learning_pose():
    memory = GraphMemory()
    first = Pose.create((0.1, 0.0, 0.0))
    memory.put(line_model("mug"), learning_pose=first)
    memory.put(line_model("mug"), learning_pose=Pose.create((0.2, 0.0, 0.0)))
    assert memory.learning_poses["mug"] == first


def test_memory_dict_round_trip():
    memory = GraphMemory()
    memory.put(line_model("mug"), learning_pose=Pose.create((0.1, 0.0, 0.0)))
    memory.record("mug", "mug")
    data = json.loads(json.dumps(memory.to_dict()))
    restored = GraphMemory.from_dict(data)
    assert restored.to_dict() == memory.to_dict()

    data["ground_truth_labels"].append("cup")
    with pytest.raises(SchemaError):
        GraphMemory.from_dict(data)
