from __future__ import annotations

import logging
from collections import deque
from typing import TYPE_CHECKING

import numpy as np

from evidence_recognizer.environment.agent import AgentKind, JumpToPose, look_rotation
from evidence_recognizer.environment.scene import ray_cast
from evidence_recognizer.exceptions import UnreachableGoalError
from evidence_recognizer.geometry import Pose, as_vec3
from evidence_recognizer.policies.config import PolicyConfig
from evidence_recognizer.policies.model_free import (
    CurvatureFollowState,
    curvature_informed_step,
    primitive_actions,
    random_walk_step,
    scan_spiral_step,
)

if TYPE_CHECKING:
    from evidence_recognizer.cmp import GoalState, StateMessage
    from evidence_recognizer.environment.agent import Action, AgentState
    from evidence_recognizer.environment.scene import Scene
    from evidence_recognizer.geometry import ArrayLike

SAME_LOCATION = 1e-9


def goal_to_actions(
    goal: GoalState,
    agent: AgentState,
    scene: Scene,
    *,
    current_location: ArrayLike | None = None,
    sensor_id: str | None = None,
    config: PolicyConfig | None = None,
) -> list[Action]:
    """Translate a goal state into a jump placing the sensor in front of the goal, looking along -normal.

    The distant agent stands off by `goal_standoff`, the surface agent by its contact offset.

    Raises:
        UnreachableGoalError: No surface is found at the goal location from the target pose.
    """
    config = config or PolicyConfig()
    target = as_vec3(goal.location)
    if current_location is not None and np.linalg.norm(target - as_vec3(current_location)) <= SAME_LOCATION:
        return []
    normal = as_vec3(goal.morphological_features.point_normal)
    standoff = agent.contact_offset if agent.kind is AgentKind.SURFACE else config.goal_standoff
    sensor_position = target + standoff * normal
    hit = ray_cast(scene, sensor_position, -normal)
    if hit is None or abs(hit.distance - standoff) > config.goal_tolerance:
        raise UnreachableGoalError(f"No surface at goal location {goal.location}")

    sensor_pose = Pose.create(sensor_position, look_rotation(-normal, agent.pose.orientation.matrix[:, 1]))
    sensor_id = sensor_id or agent.sensors[0].sensor_id
    # agent pose whose composition with the sensor offset is the sensor pose
    pose = sensor_pose.compose(agent.sensor(sensor_id).offset.inverse())
    return [JumpToPose(pose)]


class MotorSystem:
    """Chooses the next action from sensed values and goal states; it never sees object models.

    Pending goal-state jumps are executed before any model-free action.

    Args:
        config (PolicyConfig, optional): Defaults to `PolicyConfig()`.
        rng (numpy.random.Generator): Source of every random decision of the policies.
    """

    logger = logging.getLogger(__name__)

    def __init__(self, *, config: PolicyConfig | None = None, rng: np.random.Generator):
        self.config = config or PolicyConfig()
        self.rng = rng
        self.pending: deque[Action] = deque()
        self.spiral_index = 0
        self.visited: list[tuple[float, float, float]] = []
        self.prev_action: Action | None = None
        self.curvature_state = CurvatureFollowState()

    def reset(self, rng: np.random.Generator | None = None) -> None:
        if rng is not None:
            self.rng = rng
        self.pending.clear()
        self.spiral_index = 0
        self.visited = []
        self.prev_action = None
        self.curvature_state.reset()

    def set_goal(
        self,
        goal: GoalState,
        agent: AgentState,
        scene: Scene,
        current_location: ArrayLike | None = None,
    ) -> bool:
        """Queue the actions reaching `goal`; returns False (the failure signal) for an unreachable goal."""
        try:
            actions = goal_to_actions(
                goal, agent, scene, current_location=current_location, config=self.config
            )
        except UnreachableGoalError as e:
            self.logger.debug(f"Goal rejected: {e}")
            return False
        self.pending.extend(actions)
        self.logger.debug(f"Goal at {goal.location} accepted with {len(actions)} actions")
        return True

    def policy(self, agent: AgentState, learning: bool) -> str:
        name = self.config.learning_policy if learning else self.config.inference_policy
        if agent.kind is AgentKind.SURFACE and name == "spiral":
            return "curvature"
        if agent.kind is AgentKind.DISTANT and name == "curvature":
            return "random"
        return name

    def next_action(
        self, agent: AgentState, msg: StateMessage, *, learning: bool = False, off_object: bool = False
    ) -> Action:
        if msg.use_state:
            self.visited.append(msg.location)
        if self.pending:
            action = self.pending.popleft()
        else:
            policy = self.policy(agent, learning)
            primitives = primitive_actions(agent, self.config)
            if policy == "spiral":
                self.spiral_index += 1
                action = scan_spiral_step(self.spiral_index, self.config)
            elif policy == "curvature":
                action = curvature_informed_step(
                    msg,
                    self.visited,
                    self.curvature_state,
                    self.rng,
                    prev_action=self.prev_action,
                    primitives=primitives,
                    config=self.config,
                    off_object=off_object,
                )
            else:
                action = random_walk_step(
                    self.prev_action,
                    self.config.alpha,
                    self.rng,
                    primitives=primitives,
                    off_object=off_object,
                )
        self.prev_action = action
        return action
