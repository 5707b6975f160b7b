from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from sklearn.neighbors import KDTree

from evidence_recognizer.cmp import GoalState, SenderType
from evidence_recognizer.exceptions import ConfigError, MissingModelError
from evidence_recognizer.geometry import as_tuple, as_vec3, rotation_distance
from evidence_recognizer.learning_module.config import LMConfig
from evidence_recognizer.learning_module.hypotheses import (
    most_likely_hypothesis,
    possible_matches,
    possible_poses,
)
from evidence_recognizer.policies.config import HYPOTHESIS_TESTING_MODES

if TYPE_CHECKING:
    from collections.abc import Mapping

    import numpy.typing as npt

    from evidence_recognizer.learning_module.graph import ObjectModel
    from evidence_recognizer.learning_module.hypotheses import Hypothesis, HypothesisSpace

logger = logging.getLogger(__name__)


@dataclass
class HypothesisTestingTrigger:
    """Fires when the runner-up hypothesis is close to the best one and no jump happened recently.

    Args:
        ratio: Second-best over best evidence ratio above which the trigger fires.
        cooldown: Minimum number of steps between two firings.
    """

    ratio: float = 0.8
    cooldown: int = 10
    last_jump: int = 0

    def reset(self) -> None:
        self.last_jump = 0

    def should_fire(self, best: float, second: float, step: int) -> bool:
        if best <= 0 or step - self.last_jump < self.cooldown:
            return False
        return second / best > self.ratio

    def record_jump(self, step: int) -> None:
        """Start the cooldown; called once a goal was accepted by the motor system."""
        self.last_jump = step


def _runner_up_object(space: HypothesisSpace, mlh: Hypothesis, config: LMConfig) -> Hypothesis | None:
    """Best hypothesis of the strongest other possible match, if the MLH object is one of two or more."""
    possible = possible_matches(space, config)
    if mlh.object_id not in possible or len(possible) < 2:
        return None
    others = sorted(possible - {mlh.object_id})
    candidates = [(space.objects[object_id].max_evidence, object_id) for object_id in others]
    _, object_id = max(candidates, key=lambda c: c[0])
    h = space.objects[object_id]
    return space.hypothesis(object_id, int(np.argmax(h.evidence)))


def _runner_up_pose(space: HypothesisSpace, mlh: Hypothesis, config: LMConfig) -> Hypothesis | None:
    """Best possible pose of the MLH object that differs from the MLH pose beyond the pose tolerances."""
    h = space.objects[mlh.object_id]
    possible = np.zeros(len(h), dtype=bool)
    possible[possible_poses(space, mlh.object_id, config)] = True
    sensed = as_vec3(space.sensed_location)
    translations = sensed - np.einsum("kij,kj->ki", h.rotations, h.locations)
    reference = mlh.object_pose(sensed)
    far = np.linalg.norm(translations - reference.position, axis=1) > config.pose_distance
    turned = rotation_distance(h.rotations, reference.orientation.matrix) > config.pose_angle
    distinct = np.flatnonzero((far | turned) & possible)
    if not len(distinct):
        return None
    index = int(distinct[np.argmax(h.evidence[distinct])])
    return space.hypothesis(mlh.object_id, index)


def most_distinguishing_node(
    first: ObjectModel,
    first_hypothesis: Hypothesis,
    second: ObjectModel,
    second_hypothesis: Hypothesis,
    sensed: npt.NDArray[np.float64],
) -> tuple[int, float]:
    """Node of `first` farthest from its nearest neighbor in `second` once both are placed at their poses.

    Ties resolve to the lowest node index.
    """
    pose_1 = first_hypothesis.object_pose(sensed)
    pose_2 = second_hypothesis.object_pose(sensed)
    # second graph, body frame, then into the first graph's model frame
    body = second.locations @ pose_2.orientation.matrix.T + pose_2.position
    overlaid = (body - pose_1.position) @ pose_1.orientation.matrix
    distances, _ = KDTree(overlaid).query(first.locations, k=1)
    index = int(np.argmax(distances[:, 0]))
    return index, float(distances[index, 0])


def hypothesis_test_goal(
    space: HypothesisSpace,
    models: Mapping[str, ObjectModel],
    mode: str,
    config: LMConfig | None = None,
    *,
    trigger: HypothesisTestingTrigger | None = None,
    step: int = 0,
    sender_id: str = "lm",
) -> GoalState | None:
    """Propose a location that best tells the two most likely objects (or poses) apart.

    Returns:
        A goal state at the chosen node, in the body frame, asking to view the node along its stored
        normal. None when fewer than two possible objects (or poses) exist or the trigger does not
        fire. The trigger cooldown only starts once the caller records an accepted jump.

    Raises:
        MissingModelError: A hypothesis refers to an object that is not in `models`.
    """
    if mode not in HYPOTHESIS_TESTING_MODES:
        raise ConfigError(f"Valid hypothesis testing modes are {HYPOTHESIS_TESTING_MODES}")
    config = config or LMConfig()
    if space.is_empty:
        return None
    mlh = most_likely_hypothesis(space)
    runner_up_of = _runner_up_object if mode == "objects" else _runner_up_pose
    runner_up = runner_up_of(space, mlh, config)
    if runner_up is None:
        return None
    if trigger is not None and not trigger.should_fire(mlh.evidence, runner_up.evidence, step):
        return None
    for object_id in (mlh.object_id, runner_up.object_id):
        if object_id not in models:
            raise MissingModelError(f"No model named {object_id!r} for hypothesis testing")

    first, second = models[mlh.object_id], models[runner_up.object_id]
    sensed = as_vec3(space.sensed_location)
    index, mismatch = most_distinguishing_node(first, mlh, second, runner_up, sensed)
    pose = mlh.object_pose(sensed)
    node = first.nodes[index]
    logger.debug(
        f"Testing {mlh.object_id} against {runner_up.object_id} at node {index} (mismatch {mismatch:.4f} m)"
    )
    return GoalState(
        location=as_tuple(pose.orientation.apply(node.location) + pose.position),
        morphological_features=node.frame.rotated(pose.orientation),
        non_morphological_features={"object_id": mlh.object_id},
        confidence=1.0,
        use_state=True,
        sender_id=sender_id,
        sender_type=SenderType.LM,
    )
