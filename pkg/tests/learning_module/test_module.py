from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from evidence_recognizer.exceptions import ConfigError
from evidence_recognizer.geometry import Pose, Rotation
from evidence_recognizer.learning_module.config import LMConfig
from evidence_recognizer.learning_module.graph import GraphMemory
from evidence_recognizer.learning_module.hypotheses import TerminalKind
from evidence_recognizer.learning_module.module import EvidenceLearningModule
from tests.conftest import line_colors, line_model, make_message


def _walk_line(start: float = 0.1, count: int = 4):
    """Observations of `line_model()` placed at `start` along the body x axis."""
    colors = line_colors(count)
    return [make_message((start + 0.02 * k, 0.0, 0.0), rgba=colors[k]) for k in range(count)]


def _module(lm_config, *models, **kwargs) -> EvidenceLearningModule:
    memory = GraphMemory()
    for model in models:
        memory.put(model)
    return EvidenceLearningModule(lm_id="lm_0", config=lm_config, memory=memory, **kwargs)


def test_empty_memory_learns_a_new_object(lm_config):
    module = _module(lm_config)
    for k, msg in enumerate(_walk_line(count=3), start=1):
        assert module.matching_step(msg)
        terminal = module.update_terminal()
        assert terminal.kind is (TerminalKind.NO_MATCH if k == 3 else TerminalKind.CONTINUE)
    assert module.output() is None
    assert module.emit_vote() is None
    assert module.finalize_episode("line") == "new_object_0"
    assert len(module.memory.get("new_object_0")) == 3
    assert module.memory.learned_ids == ["new_object_0"]
    assert module.memory.ground_truth_labels == ["line"]


def test_unused_observations_are_only_buffered(lm_config):
    module = _module(lm_config, line_model())
    assert not module.matching_step(make_message(use_state=False))
    assert module.step == 0
    assert module.space is None
    assert module.finalize_episode("line") is None
    assert len(module.memory.get("line")) == 4


def test_recognizes_a_known_object(lm_config):
    module = _module(lm_config, line_model())
    for msg in _walk_line():
        module.matching_step(msg)
        terminal = module.update_terminal()
        if terminal.done:
            break
    assert terminal.kind is TerminalKind.MATCH
    assert terminal.hypothesis.object_id == "line"

    pose = module.detected_pose()
    np.testing.assert_allclose(pose.position, (0.1, 0.0, 0.0), atol=1e-9)
    assert pose.orientation.angle_to(Rotation.identity()) < 1e-6
    assert module.possible_pose_rotations().shape == (1, 3, 3)

    output = module.output()
    assert output.non_morphological_features["object_id"] == "line"
    assert output.confidence == 1.0
    assert module.propose_goal("objects") is None

    # the observations repeat the stored nodes
    assert module.finalize_episode("line") == "line"
    assert len(module.memory.get("line")) == 4


def test_terminal_state_is_sticky(lm_config):
    module = _module(lm_config, line_model())
    for msg in _walk_line():
        module.matching_step(msg)
        module.update_terminal()
    module.matching_step(make_message((0.5, 0.5, 0.0)))
    assert module.update_terminal().kind is TerminalKind.MATCH


def test_votes_and_reset(lm_config):
    module = _module(lm_config, line_model())
    messages = _walk_line()
    module.matching_step(messages[0])
    packet = module.emit_vote()
    assert packet.sender_id == "lm_0"
    # ceil(0.2 * 8 hypotheses)
    assert len(packet.votes) == 2
    assert packet.votes[0].evidence == 1.0

    module.receive_votes([packet])
    assert module.space.objects["line"].evidence.max() == pytest.approx(2.0)

    module.reset_episode()
    assert module.space is None
    assert module.buffer == []
    assert module.step == 0
    assert len(module.memory.get("line")) == 4


def test_executor_gives_the_same_evidence(lm_config):
    sequential = _module(lm_config, line_model(), line_model("other", count=3))
    with ThreadPoolExecutor(max_workers=2) as executor:
        parallel = _module(lm_config, line_model(), line_model("other", count=3), executor=executor)
        for msg in _walk_line():
            sequential.matching_step(msg)
            parallel.matching_step(msg)
    for object_id in ("line", "other"):
        np.testing.assert_array_equal(
            sequential.space.objects[object_id].evidence, parallel.space.objects[object_id].evidence
        )


def test_exploration_does_not_touch_hypotheses(lm_config):
    module = _module(lm_config, line_model())
    assert module.exploration_step(make_message())
    assert module.space is None
    assert len(module.buffer) == 1


def test_supervised_learning(lm_config):
    module = _module(lm_config)
    for msg in _walk_line():
        module.exploration_step(msg)
    with pytest.raises(ConfigError):
        module.finalize_episode("line", supervised=True)
    assert module.finalize_episode("line", Pose.create((0.1, 0.0, 0.0)), supervised=True) == "line"
    assert len(module.memory.get("line")) == 4

    # the same object seen 0.05 further along x lands on the same nodes
    module.reset_episode()
    for msg in _walk_line(start=0.15):
        module.exploration_step(msg)
    module.finalize_episode("line", Pose.create((0.15, 0.0, 0.0)), supervised=True)
    assert len(module.memory.get("line")) == 4
    assert module.memory.learned_ids == ["line", "line"]


def test_invalid_module():
    with pytest.raises(ConfigError):
        EvidenceLearningModule(lm_id="")
    assert EvidenceLearningModule(lm_id="lm_0").config == LMConfig()
