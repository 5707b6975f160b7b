from __future__ import annotations

import numpy as np
import pytest

from evidence_recognizer.cmp import GoalState, SenderType
from evidence_recognizer.environment.agent import (
    AgentKind,
    AgentState,
    JumpToPose,
    Orient,
    TranslateTangential,
    look_rotation,
)
from evidence_recognizer.exceptions import UnreachableGoalError
from evidence_recognizer.geometry import Pose, SurfaceFrame
from evidence_recognizer.policies.config import PolicyConfig
from evidence_recognizer.policies.model_free import scan_spiral_step
from evidence_recognizer.policies.motor import MotorSystem, goal_to_actions
from tests.conftest import make_message


def _goal(location, normal=(0.0, -1.0, 0.0)) -> GoalState:
    normal = np.asarray(normal, dtype=float)
    dir_1 = np.array([1.0, 0.0, 0.0])
    return GoalState(
        location=tuple(location),
        morphological_features=SurfaceFrame.from_vectors(normal, dir_1, np.cross(normal, dir_1)),
        non_morphological_features={"object_id": "sphere"},
        sender_id="lm_0",
        sender_type=SenderType.LM,
    )


def _agent(kind: AgentKind) -> AgentState:
    return AgentState(kind=kind, pose=Pose.create((0.0, -0.15, 0.0), look_rotation((0.0, 1.0, 0.0))))


def test_goal_places_the_distant_agent_at_the_standoff(sphere_scene):
    (action,) = goal_to_actions(_goal((0.0, -0.04, 0.0)), _agent(AgentKind.DISTANT), sphere_scene)
    assert isinstance(action, JumpToPose)
    np.testing.assert_allclose(action.pose.position, (0.0, -0.19, 0.0), atol=1e-12)
    np.testing.assert_allclose(action.pose.look_direction, (0.0, 1.0, 0.0), atol=1e-12)


def test_goal_places_the_surface_agent_at_the_contact_offset(sphere_scene):
    (action,) = goal_to_actions(_goal((0.0, -0.04, 0.0)), _agent(AgentKind.SURFACE), sphere_scene)
    np.testing.assert_allclose(action.pose.position, (0.0, -0.065, 0.0), atol=1e-12)


def test_unreachable_goals(sphere_scene):
    agent = _agent(AgentKind.DISTANT)
    with pytest.raises(UnreachableGoalError):
        goal_to_actions(_goal((0.0, -0.1, 0.0)), agent, sphere_scene)
    with pytest.raises(UnreachableGoalError):
        goal_to_actions(_goal((0.5, 0.0, 0.0), normal=(1.0, 0.0, 0.0)), agent, sphere_scene)


def test_goal_at_the_current_location(sphere_scene):
    goal = _goal((0.0, -0.04, 0.0))
    agent = _agent(AgentKind.DISTANT)
    assert goal_to_actions(goal, agent, sphere_scene, current_location=goal.location) == []


def test_set_goal_queues_before_model_free_actions(sphere_scene, rng):
    motor = MotorSystem(rng=rng)
    agent = _agent(AgentKind.DISTANT)
    assert not motor.set_goal(_goal((0.0, -0.1, 0.0)), agent, sphere_scene)
    assert not motor.pending
    assert motor.set_goal(_goal((0.0, -0.04, 0.0)), agent, sphere_scene)
    assert isinstance(motor.next_action(agent, make_message()), JumpToPose)
    assert isinstance(motor.next_action(agent, make_message()), Orient)


def test_policy_per_agent_kind(rng):
    motor = MotorSystem(rng=rng)
    distant, surface = _agent(AgentKind.DISTANT), _agent(AgentKind.SURFACE)
    assert motor.policy(distant, learning=True) == "spiral"
    assert motor.policy(surface, learning=True) == "curvature"
    assert motor.policy(distant, learning=False) == "random"
    motor = MotorSystem(config=PolicyConfig(inference_policy="curvature"), rng=rng)
    assert motor.policy(distant, learning=False) == "random"
    assert motor.policy(surface, learning=False) == "curvature"


def test_spiral_scan_while_learning(rng):
    motor = MotorSystem(rng=rng)
    agent = _agent(AgentKind.DISTANT)
    actions = [motor.next_action(agent, make_message(), learning=True) for _ in range(3)]
    assert actions == [scan_spiral_step(1), scan_spiral_step(2), scan_spiral_step(3)]
    assert len(motor.visited) == 3

    motor.reset()
    assert motor.spiral_index == 0
    assert motor.visited == []
    assert motor.next_action(agent, make_message(use_state=False), learning=True) == scan_spiral_step(1)
    assert motor.visited == []


def test_surface_agent_follows_curvature(rng):
    motor = MotorSystem(rng=rng)
    action = motor.next_action(_agent(AgentKind.SURFACE), make_message(), learning=True)
    assert isinstance(action, TranslateTangential)


def test_random_decisions_come_from_the_generator():
    def run(seed):
        motor = MotorSystem(rng=np.random.default_rng(seed))
        agent = _agent(AgentKind.DISTANT)
        return [motor.next_action(agent, make_message()) for _ in range(30)]

    assert run(3) == run(3)
