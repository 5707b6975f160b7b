from __future__ import annotations

import json

import numpy as np
import pytest

from evidence_recognizer.environment.agent import AgentKind, SensorSpec
from evidence_recognizer.exceptions import ConfigError, SchemaError
from evidence_recognizer.geometry import Rotation
from evidence_recognizer.harness.config import ExperimentConfig, LMWiring, Mode, load_config, parse_rotation


def _two_lm_kwargs() -> dict:
    return {
        "sensors": [SensorSpec(sensor_id="a"), SensorSpec(sensor_id="b")],
        "lms": [LMWiring(lm_id="lm_a", sensor_id="a"), LMWiring(lm_id="lm_b", sensor_id="b")],
    }


def test_defaults():
    config = ExperimentConfig(objects=["sphere"])
    assert config.agent is AgentKind.DISTANT
    assert config.mode is Mode.TRAIN
    assert config.rotations == [Rotation.identity()]
    assert config.required_terminal_lms == 1


def test_enums_are_parsed_from_strings():
    config = ExperimentConfig(objects=["sphere"], agent="surface", mode="eval")
    assert config.agent is AgentKind.SURFACE
    assert config.mode is Mode.EVAL


def test_dict_round_trip():
    config = ExperimentConfig(
        objects=["sphere", "cube"],
        rotations=[Rotation.identity(), Rotation.from_euler("z", 90.0)],
        votes={"lm_a": ["lm_b"]},
        min_lms_match=1,
        seed=7,
        **_two_lm_kwargs(),
    )
    data = json.loads(json.dumps(config.to_dict()))
    loaded = ExperimentConfig.from_dict(data)
    assert loaded.to_dict() == config.to_dict()
    assert loaded.rotations[1] == config.rotations[1]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"objects": []},
        {"objects": ["sphere"], "rotations": []},
        {"objects": ["sphere"], "distance": 0.0},
        {"objects": ["sphere"], "epochs": 0},
        {"objects": ["sphere"], "exploration_steps": -1},
        {"objects": ["sphere"], "max_total_steps": 0},
        {"objects": ["sphere"], "sensors": [SensorSpec(sensor_id="a"), SensorSpec(sensor_id="a")]},
        {"objects": ["sphere"], "lms": []},
        {"objects": ["sphere"], "lms": [LMWiring(lm_id="lm_0", sensor_id="elsewhere")]},
        {"objects": ["sphere"], "votes": {"lm_0": ["lm_9"]}},
        {"objects": ["sphere"], "votes": {"lm_0": ["lm_0"]}},
        {"objects": ["sphere"], "min_lms_match": 2},
        {"objects": ["sphere"], "min_lms_match": 0},
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kwargs)


def test_duplicate_lm_ids():
    lms = [LMWiring(lm_id="lm_0", sensor_id="patch"), LMWiring(lm_id="lm_0", sensor_id="patch")]
    with pytest.raises(ConfigError):
        ExperimentConfig(objects=["sphere"], lms=lms)


def test_unknown_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"objects": ["sphere"], "colour": "red"})


def test_required_terminal_lms():
    sensors = [SensorSpec(sensor_id=f"s{i}") for i in range(3)]
    lms = [LMWiring(lm_id=f"lm_{i}", sensor_id=f"s{i}") for i in range(3)]
    assert ExperimentConfig(objects=["sphere"], sensors=sensors, lms=lms).required_terminal_lms == 2
    assert ExperimentConfig(objects=["sphere"], sensors=sensors, lms=lms[:2]).required_terminal_lms == 2
    explicit = ExperimentConfig(objects=["sphere"], sensors=sensors, lms=lms, min_lms_match=3)
    assert explicit.required_terminal_lms == 3


def test_senders_to():
    config = ExperimentConfig(objects=["sphere"], votes={"lm_a": ["lm_b"]}, **_two_lm_kwargs())
    assert config.senders_to("lm_b") == ["lm_a"]
    assert config.senders_to("lm_a") == []


def test_parse_rotation_forms():
    quarter = Rotation.from_euler("z", 90.0)
    assert parse_rotation([0.0, 0.0, 90.0]).angle_to(quarter) == pytest.approx(0.0, abs=1e-9)
    assert parse_rotation({"seq": "z", "angles": [90.0]}).angle_to(quarter) == pytest.approx(0.0, abs=1e-9)
    assert parse_rotation({"quat": [0.0, 0.0, 0.0, 1.0]}) == Rotation.identity()
    np.testing.assert_allclose(parse_rotation({"angles": [0.0, 0.0, 0.0]}).matrix, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("value", ["abc", None, {"seq": "xyz"}, {"angles": ["x", 0, 0]}, [1.0, 2.0]])
def test_parse_rotation_errors(value):
    with pytest.raises(ConfigError):
        parse_rotation(value)


def test_load_config(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"objects": ["sphere"], "rotations": [[0, 0, 90]], "scene": "scene.json"}))
    config = load_config(path)
    assert config.objects == ["sphere"]
    assert config.scene == str(tmp_path / "scene.json")

    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_config(path)
