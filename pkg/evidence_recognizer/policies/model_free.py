from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from evidence_recognizer.environment.agent import AgentKind, MoveForward, Orient, TranslateTangential
from evidence_recognizer.geometry import as_tuple, as_vec3
from evidence_recognizer.learning_module.evidence import is_degenerate
from evidence_recognizer.policies.config import PolicyConfig

if TYPE_CHECKING:
    from collections.abc import Sequence

    from evidence_recognizer.cmp import StateMessage
    from evidence_recognizer.environment.agent import Action, AgentState
    from evidence_recognizer.geometry import Vec3

logger = logging.getLogger(__name__)

REVERSIBLE = (Orient, TranslateTangential, MoveForward)


def primitive_actions(agent: AgentState, config: PolicyConfig) -> list[Action]:
    """The unit moves a random walk samples from: look up/down/left/right or slide along the sensor axes."""
    if agent.kind is AgentKind.DISTANT:
        step = config.orient_step_deg
        return [Orient(step, 0.0), Orient(-step, 0.0), Orient(0.0, step), Orient(0.0, -step)]
    rotation = agent.pose.orientation.matrix
    right, up = rotation[:, 0], rotation[:, 1]
    step = config.translate_step
    return [TranslateTangential(as_tuple(step * v)) for v in (up, -up, right, -right)]


def random_walk_step(
    prev_action: Action | None,
    alpha: float,
    rng: np.random.Generator,
    *,
    primitives: Sequence[Action],
    off_object: bool = False,
) -> Action:
    """Repeat the previous action with probability `alpha`, else draw a primitive uniformly.

    When the last observation was off the object the previous action is reversed instead.
    """
    if not isinstance(prev_action, REVERSIBLE):
        prev_action = None
    if off_object and prev_action is not None:
        return prev_action.reversed()
    if prev_action is not None and rng.random() < alpha:
        return prev_action
    return primitives[int(rng.integers(len(primitives)))]


@dataclass
class CurvatureFollowState:
    following_min: bool = True
    steps_in_phase: int = 0
    heading: tuple[float, float, float] | None = None

    def reset(self) -> None:
        self.following_min = True
        self.steps_in_phase = 0
        self.heading = None


def _unit(vector: Vec3) -> Vec3:
    return vector / np.linalg.norm(vector)


def curvature_informed_step(
    msg: StateMessage,
    visited: Sequence[tuple[float, float, float]],
    state: CurvatureFollowState,
    rng: np.random.Generator,
    *,
    prev_action: Action | None,
    primitives: Sequence[Action],
    config: PolicyConfig | None = None,
    off_object: bool = False,
) -> Action:
    """Follow the minimal curvature direction, then the maximal one, alternating periodically.

    Falls back to the random walk where principal directions are undefined.
    """
    config = config or PolicyConfig()
    if off_object or msg.confidence == 0 or is_degenerate(msg.non_morphological_features):
        return random_walk_step(prev_action, config.alpha, rng, primitives=primitives, off_object=off_object)

    frame = msg.morphological_features
    normal = as_vec3(frame.point_normal)
    direction = as_vec3(frame.curvature_dir_2 if state.following_min else frame.curvature_dir_1)
    if state.heading is not None and np.dot(direction, state.heading) < 0:
        direction = -direction

    state.steps_in_phase += 1
    period = config.min_curvature_steps if state.following_min else config.max_curvature_steps
    if state.steps_in_phase >= period:
        state.following_min = not state.following_min
        state.steps_in_phase = 0
        state.heading = None
    else:
        state.heading = as_tuple(direction)

    location = as_vec3(msg.location)
    older = np.array(visited[: max(0, len(visited) - config.avoid_skip_recent)]).reshape(-1, 3)
    ahead = location + config.translate_step * direction
    if len(older) and np.min(np.linalg.norm(older - ahead, axis=1)) < config.avoid_radius:
        logger.debug("Heading into a visited region, taking an avoidance step")
        direction = _unit(np.cross(normal, direction))
    return TranslateTangential(as_tuple(config.translate_step * direction))


def spiral_point(step_index: int, config: PolicyConfig | None = None) -> tuple[float, float]:
    """(pitch, yaw) in degrees of an Archimedean spiral walked at constant arc length per step."""
    config = config or PolicyConfig()
    if step_index <= 0:
        return 0.0, 0.0
    theta = math.sqrt(4 * math.pi * step_index * config.spiral_step_deg / config.spiral_spacing_deg)
    radius = config.spiral_spacing_deg * theta / (2 * math.pi)
    return radius * math.sin(theta), radius * math.cos(theta)


def scan_spiral_step(step_index: int, config: PolicyConfig | None = None) -> Orient:
    """Look-direction change moving from spiral point `step_index - 1` to `step_index`."""
    if step_index <= 0:
        return Orient(0.0, 0.0)
    pitch, yaw = spiral_point(step_index, config)
    prev_pitch, prev_yaw = spiral_point(step_index - 1, config)
    return Orient(pitch - prev_pitch, yaw - prev_yaw)
