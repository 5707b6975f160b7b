from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np

from evidence_recognizer.exceptions import ConfigError
from evidence_recognizer.geometry import displacement_between
from evidence_recognizer.learning_module.config import LMConfig
from evidence_recognizer.learning_module.graph import BufferEntry, GraphMemory, build_graph, update_graph
from evidence_recognizer.learning_module.hypotheses import (
    HypothesisSpace,
    TerminalKind,
    TerminalState,
    check_terminal,
    detected_pose,
    init_hypotheses,
    lm_output,
    most_likely_hypothesis,
    possible_poses,
    update_evidence,
)
from evidence_recognizer.policies.hypothesis_testing import hypothesis_test_goal
from evidence_recognizer.voting import emit_vote, integrate_votes, transform_votes

if TYPE_CHECKING:
    from collections.abc import Sequence
    from concurrent.futures import Executor

    import numpy.typing as npt

    from evidence_recognizer.cmp import GoalState, StateMessage, VotePacket
    from evidence_recognizer.environment.agent import Action
    from evidence_recognizer.geometry import Pose
    from evidence_recognizer.policies.hypothesis_testing import HypothesisTestingTrigger


class EvidenceLearningModule:
    """Recognizes objects by accumulating evidence for (object, location, rotation) hypotheses.

    One instance keeps its graph memory across episodes; everything else is reset at episode start.

    Args:
        lm_id (str): Unique id, used as the sender id of outputs and votes.
        config (LMConfig, optional): Defaults to `LMConfig()`.
        memory (GraphMemory, optional): Previously learned models. Defaults to an empty memory.
        executor (Executor, optional): Runs the per-object evidence updates. If None, they run
            sequentially. Results are the same either way.
    """

    logger = logging.getLogger(__name__)

    def __init__(
        self,
        *,
        lm_id: str,
        config: LMConfig | None = None,
        memory: GraphMemory | None = None,
        executor: Executor | None = None,
    ):
        if not lm_id:
            raise ConfigError("Valid lm_id value is a non-empty string")
        self.lm_id = lm_id
        self.config = config or LMConfig()
        self.memory = memory if memory is not None else GraphMemory()
        self.executor = executor
        self.reset_episode()

    def reset_episode(self) -> None:
        self.buffer: list[BufferEntry] = []
        self.space: HypothesisSpace | None = None
        self.step = 0
        self.prev_location: tuple[float, float, float] | None = None
        self.last_message: StateMessage | None = None
        self.terminal = TerminalState(TerminalKind.CONTINUE)

    @property
    def has_hypotheses(self) -> bool:
        return self.space is not None and not self.space.is_empty

    def matching_step(self, msg: StateMessage, action: Action | None = None) -> bool:
        """Buffer the message and, if it is used, update the evidence. Returns whether it was used."""
        self.buffer.append(BufferEntry(msg, action))
        if not msg.use_state:
            return False
        self.step += 1
        if self.space is None:
            models = {object_id: model for object_id, model in self.memory.models.items() if len(model)}
            if models:
                self.space = init_hypotheses(models, msg, self.config)
            else:
                self.space = HypothesisSpace(sensed_location=msg.location, step=1)
        else:
            displacement = displacement_between(self.prev_location, msg.location)
            self.space = update_evidence(
                self.space, displacement, msg, self.memory.models, self.config, self.executor
            )
        self.prev_location = msg.location
        self.last_message = msg
        self.logger.debug(f"{self.lm_id}: step {self.step}, {len(self.space)} hypotheses")
        return True

    def exploration_step(self, msg: StateMessage, action: Action | None = None) -> bool:
        """Buffer the message for learning without touching the hypotheses."""
        self.buffer.append(BufferEntry(msg, action))
        return msg.use_state

    def update_terminal(self) -> TerminalState:
        if not self.terminal.done:
            self.terminal = check_terminal(self.space, self.step, self.config)
            if self.terminal.done:
                self.logger.debug(f"{self.lm_id}: {self.terminal.kind.value} after {self.step} steps")
        return self.terminal

    def emit_vote(self) -> VotePacket | None:
        if not self.has_hypotheses:
            return None
        return emit_vote(self.space, self.space.sensed_location, self.config.vote.top_fraction, self.lm_id)

    def receive_votes(self, packets: Sequence[VotePacket]) -> None:
        if not self.has_hypotheses or not packets:
            return
        votes = [vote for packet in packets for vote in transform_votes(packet, self.space.sensed_location)]
        self.space = integrate_votes(self.space, votes, self.config.vote)

    def output(self) -> StateMessage | None:
        """The most likely object and pose, or None before any hypothesis exists."""
        if not self.has_hypotheses:
            return None
        return lm_output(self.space, self.last_message, self.lm_id)

    def propose_goal(self, mode: str, trigger: HypothesisTestingTrigger | None = None) -> GoalState | None:
        if not self.has_hypotheses:
            return None
        return hypothesis_test_goal(
            self.space,
            self.memory.models,
            mode,
            self.config,
            trigger=trigger,
            step=self.step,
            sender_id=self.lm_id,
        )

    def detected_pose(self) -> Pose | None:
        """Pose of the detected model in the body frame."""
        if self.terminal.hypothesis is None:
            return None
        return detected_pose(self.space, self.terminal.hypothesis)

    def possible_pose_rotations(self) -> npt.NDArray[np.float64]:
        """Rotations of the possible poses of the detected object, shape (K, 3, 3)."""
        hypothesis = self.terminal.hypothesis
        if hypothesis is None:
            return np.zeros((0, 3, 3))
        indices = possible_poses(self.space, hypothesis.object_id, self.config)
        return self.space.objects[hypothesis.object_id].rotations[indices]

    def finalize_episode(
        self, label: str, ground_truth_pose: Pose | None = None, *, supervised: bool = False
    ) -> str | None:
        """Store what was observed this episode into memory.

        Args:
            label: Ground-truth label of the object, recorded for analysis only unless `supervised`.
            ground_truth_pose: Pose of the object in the body frame.
            supervised: Use the label as graph id and the ground-truth pose instead of the detected one.

        Returns:
            The id of the learned or updated graph, or None when nothing was observed.
        """
        if not any(entry.message.use_state for entry in self.buffer):
            self.logger.warning(f"{self.lm_id}: nothing observed, memory unchanged")
            return None
        if supervised:
            if ground_truth_pose is None:
                raise ConfigError("Supervised learning requires the ground-truth pose")
            graph_id = label
            if label in self.memory:
                learned_at = self.memory.learning_poses[label]
                pose = ground_truth_pose.compose(learned_at.inverse())
                model = update_graph(self.memory.get(label), self.buffer, pose, self.config)
            else:
                model = build_graph(self.buffer, self.config, label)
        else:
            hypothesis = self.terminal.hypothesis
            if self.terminal.kind in (TerminalKind.TIME_OUT, TerminalKind.CONTINUE) and self.has_hypotheses:
                mlh = most_likely_hypothesis(self.space)
                hypothesis = mlh if mlh.evidence > 0 else None
            elif self.terminal.kind is TerminalKind.NO_MATCH:
                hypothesis = None
            if hypothesis is None:
                graph_id = self.memory.new_object_id()
                model = build_graph(self.buffer, self.config, graph_id)
            else:
                graph_id = hypothesis.object_id
                pose = detected_pose(self.space, hypothesis)
                model = update_graph(self.memory.get(graph_id), self.buffer, pose, self.config)
        self.memory.put(model, learning_pose=ground_truth_pose)
        self.memory.record(graph_id, label)
        self.logger.info(f"{self.lm_id}: learned {graph_id} ({len(model)} nodes) for {label}")
        return graph_id
