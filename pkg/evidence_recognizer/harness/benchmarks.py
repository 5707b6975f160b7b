"""Closed-loop benchmark suites, each building its experiments in code."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

from evidence_recognizer.environment.agent import SensorSpec
from evidence_recognizer.environment.scene import WHITE, default_objects, mug
from evidence_recognizer.environment.shapes import Cylinder
from evidence_recognizer.exceptions import ConfigError
from evidence_recognizer.geometry import Pose, Rotation
from evidence_recognizer.harness.config import ExperimentConfig, LMWiring, Mode
from evidence_recognizer.harness.experiment import (
    EpisodeResult,
    ExperimentState,
    build_state,
    run_episode,
    run_experiment,
)
from evidence_recognizer.harness.metrics import compute_metrics, label_mapping
from evidence_recognizer.learning_module.graph import NEW_OBJECT_PREFIX
from evidence_recognizer.learning_module.hypotheses import TerminalKind
from evidence_recognizer.policies.config import PolicyConfig

if TYPE_CHECKING:
    from collections.abc import Callable

    from evidence_recognizer.environment.shapes import SceneObject

logger = logging.getLogger(__name__)

# one view of every face of the object, rolled about the viewing axis so that no evaluation
# rotation is seen verbatim during training
TRAINING_ROTATIONS = [
    Rotation.identity(),
    Rotation.from_euler("z", 180.0),
    Rotation.from_euler("y", 90.0) @ Rotation.from_euler("z", 90.0),
    Rotation.from_euler("y", 90.0) @ Rotation.from_euler("z", -90.0),
    Rotation.from_euler("y", 90.0) @ Rotation.from_euler("x", 90.0),
    Rotation.from_euler("y", 90.0) @ Rotation.from_euler("x", -90.0),
]
EVAL_ROTATIONS = [Rotation.from_euler(axis, 90.0) for axis in "xyz"]
SCAN_POLICY = PolicyConfig(learning_policy="spiral", spiral_spacing_deg=5.0, spiral_step_deg=3.0)
SCAN_STEPS = 300
SEEDED_EPISODES = 20


@dataclass(eq=False)
class BenchmarkReport:
    name: str
    metrics: dict[str, Any]
    results: list[EpisodeResult] = field(default_factory=list)


def supervised_training(
    config: ExperimentConfig, shapes: dict[str, SceneObject] | None = None
) -> ExperimentState:
    """Learn every object at every training rotation with ground-truth labels and poses."""
    config = replace(
        config,
        rotations=TRAINING_ROTATIONS,
        mode=Mode.TRAIN,
        supervised=True,
        exploration_steps=SCAN_STEPS,
        policy=replace(config.policy, learning_policy="spiral"),
    )
    state = build_state(config, shapes=shapes)
    run_experiment(state)
    return state


def evaluation_state(
    trained: ExperimentState, config: ExperimentConfig, shapes: dict[str, SceneObject] | None = None
) -> ExperimentState:
    """A state in evaluation mode sharing the memories learned in `trained`."""
    memories = {wiring.lm_id: trained.lms[wiring.lm_id].memory for wiring in config.lms}
    state = build_state(replace(config, mode=Mode.EVAL), memories, shapes=shapes)
    state.episodes_run = trained.episodes_run
    return state


def seeded_episodes(state: ExperimentState, count: int = SEEDED_EPISODES) -> list[EpisodeResult]:
    """`count` episodes cycling through the configured objects and rotations."""
    objects, rotations = state.config.objects, state.config.rotations
    start = state.episodes_run
    return [
        run_episode(state, objects[i % len(objects)], rotations[i % len(rotations)], episode=start + i)
        for i in range(count)
    ]


def recognition(seed: int = 0) -> BenchmarkReport:
    """Learn the benchmark objects, then recognize them at held-out rotations."""
    base = ExperimentConfig(objects=list(default_objects()), seed=seed, policy=SCAN_POLICY)
    trained = supervised_training(base)
    state = evaluation_state(trained, replace(base, rotations=EVAL_ROTATIONS))
    results = run_experiment(state)
    memory = state.lms[base.lms[0].lm_id].memory
    metrics = compute_metrics(results, label_mapping(memory))
    metrics["new_object_matches"] = sum(
        1 for r in results if r.detected_object and r.detected_object.startswith(NEW_OBJECT_PREFIX)
    )
    return BenchmarkReport("recognition", metrics, results)


def unsupervised(seed: int = 0) -> BenchmarkReport:
    """Learn one object from scratch without labels, then see it again at the same pose."""
    config = ExperimentConfig(objects=["mug"], seed=seed, mode=Mode.TRAIN, policy=SCAN_POLICY)
    state = build_state(config)
    lm = state.lms[config.lms[0].lm_id]
    results, models = [], []
    for episode in range(2):
        results.append(run_episode(state, "mug", Rotation.identity(), episode=episode))
        models.append(len(lm.memory))
    metrics = {
        "terminals": [r.terminal.value for r in results],
        "models_after_episode": models,
        "learned_graphs": [r.learned_graph for r in results],
    }
    return BenchmarkReport("unsupervised", metrics, results)


def voting(seed: int = 0) -> BenchmarkReport:
    """Compare steps to recognition of one LM against two LMs exchanging votes."""
    sensors = [
        SensorSpec(sensor_id="patch_0"),
        SensorSpec(sensor_id="patch_1", offset=Pose.create((0.0, 0.0, 0.0), Rotation.from_euler("y", 2.0))),
    ]
    lms = [LMWiring(lm_id="lm_0", sensor_id="patch_0"), LMWiring(lm_id="lm_1", sensor_id="patch_1")]
    base = ExperimentConfig(
        objects=list(default_objects()), seed=seed, policy=SCAN_POLICY, sensors=sensors, lms=lms
    )
    trained = supervised_training(base)
    voting_config = replace(
        base, rotations=EVAL_ROTATIONS, votes={"lm_0": ["lm_1"], "lm_1": ["lm_0"]}, min_lms_match=1
    )
    single_config = replace(base, rotations=EVAL_ROTATIONS, sensors=sensors[:1], lms=lms[:1])
    voting_results = seeded_episodes(evaluation_state(trained, voting_config))
    single_results = seeded_episodes(evaluation_state(trained, single_config))
    metrics = {
        "single": compute_metrics(single_results),
        "voting": compute_metrics(voting_results),
    }
    metrics["speedup"] = metrics["single"]["mean_total_steps"] - metrics["voting"]["mean_total_steps"]
    return BenchmarkReport("voting", metrics, voting_results + single_results)


def hypothesis_testing(seed: int = 0) -> BenchmarkReport:
    """Tell a plain cylinder from a mug with the same body, with and without test jumps."""
    shapes = {"white_cylinder": Cylinder(radius=0.035, height=0.09, color=WHITE), "mug": mug()}
    base = ExperimentConfig(objects=["white_cylinder", "mug"], seed=seed, policy=SCAN_POLICY)
    trained = supervised_training(base, shapes)
    results = {}
    for mode in (None, "objects"):
        config = replace(base, rotations=EVAL_ROTATIONS, policy=replace(base.policy, hypothesis_testing=mode))
        results[mode or "disabled"] = seeded_episodes(evaluation_state(trained, config, shapes))
    metrics = {name: compute_metrics(episodes) for name, episodes in results.items()}
    metrics["steps_saved"] = metrics["disabled"]["mean_total_steps"] - metrics["objects"]["mean_total_steps"]
    return BenchmarkReport("hypothesis-testing", metrics, results["disabled"] + results["objects"])


SUITES: dict[str, Callable[[int], BenchmarkReport]] = {
    "recognition": recognition,
    "unsupervised": unsupervised,
    "voting": voting,
    "hypothesis-testing": hypothesis_testing,
}


def run_suite(name: str, seed: int = 0) -> BenchmarkReport:
    try:
        suite = SUITES[name]
    except KeyError:
        raise ConfigError(f"Valid suites are {sorted(SUITES)}") from None
    logger.info(f"Running benchmark suite {name} with seed {seed}")
    report = suite(seed)
    matched = sum(1 for r in report.results if r.terminal is TerminalKind.MATCH)
    logger.info(f"{name}: {matched}/{len(report.results)} episodes matched")
    return report
