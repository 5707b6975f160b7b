from __future__ import annotations

import enum
import logging
import math
from typing import TYPE_CHECKING

import numpy as np

from evidence_recognizer.environment.agent import VIEW_FINDER, MoveForward, OrientToFace, apply_action
from evidence_recognizer.environment.scene import ray_cast, sense_patch
from evidence_recognizer.exceptions import ObjectNotFoundError
from evidence_recognizer.geometry import as_tuple
from evidence_recognizer.policies.config import PolicyConfig

if TYPE_CHECKING:
    from evidence_recognizer.environment.agent import Action, AgentState, SensorSpec
    from evidence_recognizer.environment.scene import Patch, Scene

logger = logging.getLogger(__name__)

# fractions above this are treated as a view filled by the object
_FULL_VIEW = 0.999


class UtilityMode(str, enum.Enum):
    GET_GOOD_VIEW = "get_good_view"
    TOUCH_OBJECT = "touch_object"


def _view(scene: Scene, agent: AgentState, viewfinder: SensorSpec) -> Patch:
    return sense_patch(scene, agent.sensor_pose(viewfinder.sensor_id), viewfinder.resolution, viewfinder.zoom)


def _center_on_object(patch: Patch) -> OrientToFace | None:
    """Orient toward the on-object pixel nearest to the image center, if the center misses the object."""
    if patch.center_on_object or not patch.on_object.any():
        return None
    rows, cols = np.nonzero(patch.on_object)
    center_row, center_col = patch.center_index
    nearest = int(np.argmin((rows - center_row) ** 2 + (cols - center_col) ** 2))
    return OrientToFace(as_tuple(patch.locations[rows[nearest], cols[nearest]]))


def get_good_view(
    scene: Scene, agent: AgentState, viewfinder: SensorSpec = VIEW_FINDER, config: PolicyConfig | None = None
) -> list[Action]:
    """Actions that center the object in the view finder and bring its pixel share into the target band.

    Raises:
        ObjectNotFoundError: The object is not visible, or not centered after `max_utility_steps`.
    """
    config = config or PolicyConfig()
    low, high = config.view_fraction_range
    actions: list[Action] = []
    for _ in range(config.max_utility_steps):
        patch = _view(scene, agent, viewfinder)
        if not patch.on_object.any():
            raise ObjectNotFoundError("No object in the view finder")
        action = _center_on_object(patch)
        if action is None:
            fraction = patch.on_object_fraction
            if low <= fraction <= high:
                break
            depth = float(patch.depths[patch.center_index])
            # the pixel share of an object falls with the square of its distance
            factor = 2.0 if fraction >= _FULL_VIEW else math.sqrt(fraction / config.view_fraction_target)
            action = MoveForward(depth - depth * factor)
        actions.append(action)
        agent = apply_action(scene, agent, action)
    else:
        patch = _view(scene, agent, viewfinder)

    if not patch.center_on_object:
        raise ObjectNotFoundError(f"Object not centered after {config.max_utility_steps} utility steps")
    if not low <= patch.on_object_fraction <= high:
        logger.warning(f"View finder fraction {patch.on_object_fraction:.2f} stayed outside [{low}, {high}]")
    logger.debug(f"Good view reached with {len(actions)} actions")
    return actions


def touch_object(
    scene: Scene, agent: AgentState, viewfinder: SensorSpec = VIEW_FINDER, config: PolicyConfig | None = None
) -> list[Action]:
    """Actions that face the object and advance until the sensor sits at the contact offset."""
    config = config or PolicyConfig()
    actions: list[Action] = []
    patch = _view(scene, agent, viewfinder)
    if not patch.on_object.any():
        raise ObjectNotFoundError("No object in the view finder")
    face = _center_on_object(patch)
    if face is not None:
        actions.append(face)
        agent = apply_action(scene, agent, face)
    hit = ray_cast(scene, agent.pose.position, agent.pose.look_direction)
    if hit is None:
        raise ObjectNotFoundError("No surface along the look direction")
    if hit.distance != agent.contact_offset:
        actions.append(MoveForward(hit.distance - agent.contact_offset))
    return actions


def utility_positioning(
    scene: Scene,
    agent: AgentState,
    mode: UtilityMode | str,
    viewfinder: SensorSpec = VIEW_FINDER,
    config: PolicyConfig | None = None,
) -> list[Action]:
    """Episode-start positioning. Observations made while executing these actions are never sent to LMs."""
    mode = UtilityMode(mode)
    if mode is UtilityMode.GET_GOOD_VIEW:
        return get_good_view(scene, agent, viewfinder, config)
    return touch_object(scene, agent, viewfinder, config)
