from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from evidence_recognizer.environment.agent import AgentKind, SensorSpec
from evidence_recognizer.exceptions import ConfigError, SchemaError
from evidence_recognizer.geometry import Rotation
from evidence_recognizer.learning_module.config import LMConfig
from evidence_recognizer.policies.config import PolicyConfig
from evidence_recognizer.sensor_module import SensorConfig


class Mode(str, enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True, kw_only=True)
class LMWiring:
    lm_id: str
    sensor_id: str

    def to_dict(self) -> dict[str, Any]:
        return {"lm_id": self.lm_id, "sensor_id": self.sensor_id}


def parse_rotation(value: Any) -> Rotation:
    """Read a rotation given as extrinsic xyz euler degrees, `{"seq", "angles"}` or `{"quat"}`."""
    try:
        if isinstance(value, dict):
            if "quat" in value:
                return Rotation(tuple(float(v) for v in value["quat"]))
            return Rotation.from_euler(value.get("seq", "xyz"), [float(v) for v in value["angles"]])
        return Rotation.from_euler("xyz", [float(v) for v in value])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid rotation {value!r}: {e}") from e


@dataclass(kw_only=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    Args:
        objects: Labels of the objects presented, one episode per (object, rotation).
        rotations: Object rotations applied in every epoch, in order.
        scene: Optional scene file providing the shapes of the labels; unknown labels fall back to
            the built-in benchmark objects.
        agent: "distant" or "surface".
        distance: Initial distance (m) between the agent and the object origin.
        sensors: Sensor patches carried by the agent.
        lms: Learning modules and the sensor each one listens to.
        votes: For every LM id, the LM ids it sends votes to.
        mode: "train" learns after every episode, "eval" never changes memory.
        epochs: Number of passes over all (object, rotation) pairs.
        seed: Root seed; episode seeds derive from it and the episode index.
        min_lms_match: LMs that must reach a terminal state to end an episode. Defaults to all LMs
            for a single LM and to a majority otherwise.
        exploration_steps: Steps taken after a matching terminal in training, and the length of
            supervised episodes.
        supervised: Learn with ground-truth labels and poses.
        max_total_steps: Hard limit on the steps of an episode.
    """

    objects: list[str]
    rotations: list[Rotation] = field(default_factory=lambda: [Rotation.identity()])
    scene: str | None = None
    agent: AgentKind = AgentKind.DISTANT
    distance: float = 0.15
    sensors: list[SensorSpec] = field(default_factory=lambda: [SensorSpec(sensor_id="patch")])
    lms: list[LMWiring] = field(default_factory=lambda: [LMWiring(lm_id="lm_0", sensor_id="patch")])
    votes: dict[str, list[str]] = field(default_factory=dict)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    lm: LMConfig = field(default_factory=LMConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    mode: Mode = Mode.TRAIN
    epochs: int = 1
    seed: int = 0
    min_lms_match: int | None = None
    exploration_steps: int = 100
    supervised: bool = False
    max_total_steps: int = 1000

    def __post_init__(self):
        self.agent = AgentKind(self.agent)
        self.mode = Mode(self.mode)
        if not self.objects:
            raise ConfigError("At least one object is required")
        if not self.rotations:
            raise ConfigError("At least one rotation is required")
        if self.distance <= 0:
            raise ConfigError("Valid distance value is greater than 0")
        if self.epochs < 1:
            raise ConfigError("Valid epochs value is greater than 0")
        if self.exploration_steps < 0:
            raise ConfigError("Valid exploration_steps value is greater than or equal to 0")
        if self.max_total_steps < 1:
            raise ConfigError("Valid max_total_steps value is greater than 0")
        sensor_ids = {sensor.sensor_id for sensor in self.sensors}
        if len(sensor_ids) != len(self.sensors):
            raise ConfigError("Sensor ids must be distinct")
        lm_ids = [wiring.lm_id for wiring in self.lms]
        if not lm_ids or len(set(lm_ids)) != len(lm_ids):
            raise ConfigError("Valid lms are a non-empty list with distinct ids")
        for wiring in self.lms:
            if wiring.sensor_id not in sensor_ids:
                raise ConfigError(f"{wiring.lm_id} listens to unknown sensor {wiring.sensor_id!r}")
        for sender, receivers in self.votes.items():
            unknown = sorted({sender, *receivers} - set(lm_ids))
            if unknown:
                raise ConfigError(f"Vote wiring references unknown LMs {unknown}")
            if sender in receivers:
                raise ConfigError(f"{sender} cannot vote for itself")
        if self.min_lms_match is not None and not 1 <= self.min_lms_match <= len(lm_ids):
            raise ConfigError(f"Valid min_lms_match value is in [1, {len(lm_ids)}]")

    @property
    def required_terminal_lms(self) -> int:
        if self.min_lms_match is not None:
            return self.min_lms_match
        return 1 if len(self.lms) == 1 else len(self.lms) // 2 + 1

    def senders_to(self, lm_id: str) -> list[str]:
        return [sender for sender, receivers in self.votes.items() if lm_id in receivers]

    def to_dict(self) -> dict[str, Any]:
        return {
            "objects": list(self.objects),
            "rotations": [{"quat": list(rotation.quat)} for rotation in self.rotations],
            "scene": self.scene,
            "agent": self.agent.value,
            "distance": self.distance,
            "sensors": [sensor.to_dict() for sensor in self.sensors],
            "lms": [wiring.to_dict() for wiring in self.lms],
            "votes": {sender: list(receivers) for sender, receivers in self.votes.items()},
            "sensor": self.sensor.to_dict(),
            "lm": self.lm.to_dict(),
            "policy": self.policy.to_dict(),
            "mode": self.mode.value,
            "epochs": self.epochs,
            "seed": self.seed,
            "min_lms_match": self.min_lms_match,
            "exploration_steps": self.exploration_steps,
            "supervised": self.supervised,
            "max_total_steps": self.max_total_steps,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        data = dict(data)
        try:
            if "rotations" in data:
                data["rotations"] = [parse_rotation(value) for value in data["rotations"]]
            if "sensors" in data:
                data["sensors"] = [SensorSpec.from_dict(sensor) for sensor in data["sensors"]]
            if "lms" in data:
                data["lms"] = [LMWiring(**wiring) for wiring in data["lms"]]
            if "sensor" in data:
                data["sensor"] = SensorConfig.from_dict(data["sensor"])
            if "lm" in data:
                data["lm"] = LMConfig.from_dict(data["lm"])
            if "policy" in data:
                data["policy"] = PolicyConfig.from_dict(data["policy"])
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid experiment config: {e}") from e


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}") from e
    config = ExperimentConfig.from_dict(data)
    if config.scene is not None and not Path(config.scene).is_absolute():
        config.scene = str(path.parent / config.scene)
    return config
