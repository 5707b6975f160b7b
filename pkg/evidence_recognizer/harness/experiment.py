from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from evidence_recognizer.cmp import log_message
from evidence_recognizer.environment.agent import AgentKind, AgentState, apply_action, look_rotation
from evidence_recognizer.environment.scene import Scene, default_objects, load_scene, sense_patch
from evidence_recognizer.exceptions import ConfigError
from evidence_recognizer.geometry import Pose, rotation_distance
from evidence_recognizer.harness.config import Mode
from evidence_recognizer.learning_module.hypotheses import TerminalKind
from evidence_recognizer.learning_module.module import EvidenceLearningModule
from evidence_recognizer.policies.hypothesis_testing import HypothesisTestingTrigger
from evidence_recognizer.policies.motor import MotorSystem
from evidence_recognizer.policies.utility import UtilityMode, utility_positioning
from evidence_recognizer.sensor_module import SensorModule

if TYPE_CHECKING:
    from concurrent.futures import Executor

    from evidence_recognizer.cmp import StateMessage
    from evidence_recognizer.environment.scene import Patch
    from evidence_recognizer.environment.shapes import SceneObject
    from evidence_recognizer.geometry import Rotation
    from evidence_recognizer.harness.config import ExperimentConfig
    from evidence_recognizer.learning_module.graph import GraphMemory

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class EpisodeResult:
    """Outcome of one episode; `rotation_error` (degrees) is only set for matches."""

    episode: int
    label: str
    rotation: Rotation
    terminal: TerminalKind
    total_steps: int
    lm_steps: int
    detected_object: str | None = None
    detected_rotation: Rotation | None = None
    rotation_error: float | None = None
    symmetric: bool = False
    learned_graph: str | None = None
    trace: list[dict[str, Any]] = field(default_factory=list)

    def to_row(self) -> dict[str, Any]:
        return {
            "episode": self.episode,
            "label": self.label,
            "rotation_quat": " ".join(repr(v) for v in self.rotation.quat),
            "terminal": self.terminal.value,
            "total_steps": self.total_steps,
            "lm_steps": self.lm_steps,
            "detected_object": self.detected_object or "",
            "rotation_error": "" if self.rotation_error is None else repr(self.rotation_error),
            "symmetric": self.symmetric,
            "learned_graph": self.learned_graph or "",
        }


@dataclass(eq=False)
class ExperimentState:
    """The learning system and its environment; only LM memories outlive an episode."""

    config: ExperimentConfig
    shapes: dict[str, SceneObject]
    sensor_modules: dict[str, SensorModule]
    lms: dict[str, EvidenceLearningModule]
    motor: MotorSystem
    triggers: dict[str, HypothesisTestingTrigger]
    episodes_run: int = 0


def object_shapes(
    config: ExperimentConfig, extra: dict[str, SceneObject] | None = None
) -> dict[str, SceneObject]:
    """Shapes by label: built-in objects, overridden by the scene file, then by `extra`."""
    shapes = default_objects()
    if config.scene is not None:
        scene = load_scene(Path(config.scene))
        shapes.update({item.ground_truth_label: item.object for item in scene.instances})
    shapes.update(extra or {})
    missing = sorted(set(config.objects) - set(shapes))
    if missing:
        raise ConfigError(f"No shape for objects {missing}")
    return shapes


def build_state(
    config: ExperimentConfig,
    memories: dict[str, GraphMemory] | None = None,
    executor: Executor | None = None,
    shapes: dict[str, SceneObject] | None = None,
) -> ExperimentState:
    """Fresh sensor modules, LMs and motor system; LMs start from `memories` when given."""
    memories = memories or {}
    return ExperimentState(
        config=config,
        shapes=object_shapes(config, shapes),
        sensor_modules={
            sensor.sensor_id: SensorModule(
                sensor_id=sensor.sensor_id, config=config.sensor, rng=np.random.default_rng(config.seed)
            )
            for sensor in config.sensors
        },
        lms={
            wiring.lm_id: EvidenceLearningModule(
                lm_id=wiring.lm_id, config=config.lm, memory=memories.get(wiring.lm_id), executor=executor
            )
            for wiring in config.lms
        },
        motor=MotorSystem(config=config.policy, rng=np.random.default_rng(config.seed)),
        triggers={
            wiring.lm_id: HypothesisTestingTrigger(
                ratio=config.policy.trigger_ratio, cooldown=config.policy.trigger_cooldown
            )
            for wiring in config.lms
        },
    )


def initial_agent(config: ExperimentConfig) -> AgentState:
    """The agent in front of the object origin, looking at it along +y."""
    position = np.array([0.0, -config.distance, 0.0])
    return AgentState(
        kind=config.agent,
        pose=Pose.create(position, look_rotation(-position)),
        sensors=tuple(config.sensors),
    )


def _sense(
    state: ExperimentState, scene: Scene, agent: AgentState
) -> tuple[dict[str, StateMessage], dict[str, Patch]]:
    messages, patches = {}, {}
    for sensor in state.config.sensors:
        patch = sense_patch(scene, agent.sensor_pose(sensor.sensor_id), sensor.resolution, sensor.zoom)
        msg = state.sensor_modules[sensor.sensor_id].step(patch)
        log_message(msg)
        messages[sensor.sensor_id], patches[sensor.sensor_id] = msg, patch
    return messages, patches


def _vote_round(state: ExperimentState) -> None:
    packets = {}
    for lm_id, lm in state.lms.items():
        packet = lm.emit_vote()
        if packet is not None:
            log_message(packet)
            packets[lm_id] = packet
    for lm_id, lm in state.lms.items():
        incoming = [packets[sender] for sender in state.config.senders_to(lm_id) if sender in packets]
        lm.receive_votes(incoming)


def _episode_over(state: ExperimentState) -> bool:
    done = [lm.terminal.done for lm in state.lms.values()]
    return sum(done) >= state.config.required_terminal_lms


def _trace_row(state: ExperimentState, step: int, messages: dict[str, StateMessage]) -> dict[str, Any]:
    row: dict[str, Any] = {"step": step}
    for wiring in state.config.lms:
        lm = state.lms[wiring.lm_id]
        output = lm.output()
        row[wiring.lm_id] = {
            "use_state": messages[wiring.sensor_id].use_state,
            "lm_step": lm.step,
            "terminal": lm.terminal.kind.value,
            "mlh": None if output is None else output.non_morphological_features["object_id"],
            "evidence": None if output is None else output.non_morphological_features["evidence"][0],
            "object_evidence": {} if not lm.has_hypotheses else lm.space.object_evidence(),
        }
    return row


def _off_object(agent: AgentState, patch: Patch) -> bool:
    if agent.kind is AgentKind.SURFACE and not agent.in_contact:
        return True
    return not patch.center_on_object


def _rotation_error(
    lm: EvidenceLearningModule, object_rotation: Rotation, symmetric: bool
) -> tuple[Rotation, float | None]:
    """Angle (degrees) between the detected rotation and the true one relative to the learning pose."""
    hypothesis = lm.terminal.hypothesis
    learned_at = lm.memory.learning_poses.get(hypothesis.object_id)
    if learned_at is None:
        return hypothesis.rotation, None
    expected = (object_rotation @ learned_at.orientation.inv()).matrix
    candidates = lm.possible_pose_rotations() if symmetric else hypothesis.rotation.matrix[None]
    if not len(candidates):
        candidates = hypothesis.rotation.matrix[None]
    return hypothesis.rotation, math.degrees(float(np.min(rotation_distance(candidates, expected))))


def _summarize(
    state: ExperimentState, episode: int, label: str, rotation: Rotation, total_steps: int
) -> EpisodeResult:
    lms = [state.lms[wiring.lm_id] for wiring in state.config.lms]
    result = EpisodeResult(
        episode=episode,
        label=label,
        rotation=rotation,
        terminal=TerminalKind.TIME_OUT,
        total_steps=total_steps,
        lm_steps=max(lm.step for lm in lms),
    )
    matched = [lm for lm in lms if lm.terminal.kind is TerminalKind.MATCH]
    if matched:
        lm = matched[0]
        result.terminal = TerminalKind.MATCH
        result.detected_object = lm.terminal.hypothesis.object_id
        result.symmetric = lm.terminal.symmetric
        result.detected_rotation, result.rotation_error = _rotation_error(lm, rotation, lm.terminal.symmetric)
    elif all(lm.terminal.kind is TerminalKind.NO_MATCH for lm in lms):
        result.terminal = TerminalKind.NO_MATCH
    return result


def run_episode(
    state: ExperimentState, label: str, rotation: Rotation, *, episode: int | None = None
) -> EpisodeResult:
    """Present one object at one rotation until enough LMs are terminal, then learn in training mode."""
    config = state.config
    episode = state.episodes_run if episode is None else episode
    learning = config.mode is Mode.TRAIN
    seeds = np.random.SeedSequence([config.seed, episode]).spawn(1 + len(config.sensors))
    scene = Scene.single(state.shapes[label], label, Pose.create((0.0, 0.0, 0.0), rotation))
    object_pose = scene.instances[0].pose

    state.motor.reset(np.random.default_rng(seeds[0]))
    for seed, sensor in zip(seeds[1:], config.sensors, strict=True):
        state.sensor_modules[sensor.sensor_id].reset(np.random.default_rng(seed))
    for lm_id, lm in state.lms.items():
        lm.reset_episode()
        state.triggers[lm_id].reset()

    agent = initial_agent(config)
    mode = UtilityMode.TOUCH_OBJECT if agent.kind is AgentKind.SURFACE else UtilityMode.GET_GOOD_VIEW
    for action in utility_positioning(scene, agent, mode, config=config.policy):
        agent = apply_action(scene, agent, action)

    primary = config.lms[0]
    action = None
    total_steps = 0
    trace: list[dict[str, Any]] = []
    matching = not (config.supervised and learning)
    exploration_left = config.exploration_steps if learning else 0
    while total_steps < config.max_total_steps:
        messages, patches = _sense(state, scene, agent)
        total_steps += 1
        if matching:
            for wiring in config.lms:
                lm = state.lms[wiring.lm_id]
                if not lm.terminal.done:
                    lm.matching_step(messages[wiring.sensor_id], action)
            _vote_round(state)
            for lm in state.lms.values():
                lm.update_terminal()
            trace.append(_trace_row(state, total_steps, messages))
            if _episode_over(state):
                matching = False
                logger.debug(f"Episode {episode}: matching phase over after {total_steps} steps")
                if not exploration_left:
                    break
            elif config.policy.hypothesis_testing is not None:
                for lm_id, lm in state.lms.items():
                    goal = lm.propose_goal(config.policy.hypothesis_testing, state.triggers[lm_id])
                    if goal is not None:
                        log_message(goal)
                        current = messages[primary.sensor_id].location
                        if state.motor.set_goal(goal, agent, scene, current_location=current):
                            state.triggers[lm_id].record_jump(lm.step)
                            break
        else:
            for wiring in config.lms:
                state.lms[wiring.lm_id].exploration_step(messages[wiring.sensor_id], action)
            exploration_left -= 1
            if exploration_left <= 0:
                break
        action = state.motor.next_action(
            agent,
            messages[primary.sensor_id],
            learning=learning,
            off_object=_off_object(agent, patches[primary.sensor_id]),
        )
        agent = apply_action(scene, agent, action)

    result = _summarize(state, episode, label, rotation, total_steps)
    result.trace = trace
    if learning:
        learned = {
            lm_id: lm.finalize_episode(label, object_pose, supervised=config.supervised)
            for lm_id, lm in state.lms.items()
        }
        result.learned_graph = learned[primary.lm_id]
    state.episodes_run = max(state.episodes_run, episode + 1)
    logger.info(
        f"Episode {episode} ({label}): {result.terminal.value} after {total_steps} steps,"
        f" detected {result.detected_object}"
    )
    return result


def run_epoch(state: ExperimentState) -> list[EpisodeResult]:
    """One episode per (object, rotation), objects outermost, in config order."""
    results = []
    for label in state.config.objects:
        for rotation in state.config.rotations:
            results.append(run_episode(state, label, rotation))
    return results


def run_experiment(state: ExperimentState) -> list[EpisodeResult]:
    results = []
    for epoch in range(state.config.epochs):
        logger.info(f"Epoch {epoch + 1}/{state.config.epochs}")
        results.extend(run_epoch(state))
    return results
