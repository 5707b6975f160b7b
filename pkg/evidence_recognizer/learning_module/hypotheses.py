from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from evidence_recognizer.cmp import SenderType, StateMessage
from evidence_recognizer.exceptions import EmptyHypothesisSpaceError
from evidence_recognizer.geometry import (
    Pose,
    Rotation,
    align_frame_matrices,
    as_tuple,
    as_vec3,
    rotation_distance,
)
from evidence_recognizer.learning_module.evidence import (
    feature_evidence_array,
    is_degenerate,
    morphology_evidence_array,
)

if TYPE_CHECKING:
    from collections.abc import Mapping
    from concurrent.futures import Executor

    import numpy.typing as npt

    from evidence_recognizer.geometry import Displacement
    from evidence_recognizer.learning_module.config import LMConfig
    from evidence_recognizer.learning_module.graph import ObjectModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hypothesis:
    object_id: str
    location: tuple[float, float, float]
    rotation: Rotation
    evidence: float
    index: int = 0

    def object_pose(self, sensed_location: npt.NDArray[np.float64]) -> Pose:
        """Pose of the model reference frame in the body frame implied by this hypothesis."""
        return Pose.create(as_vec3(sensed_location) - self.rotation.apply(self.location), self.rotation)


@dataclass(eq=False)
class ObjectHypotheses:
    """Parallel arrays of the hypotheses about one object; rotations map the model frame to the body frame."""

    locations: npt.NDArray[np.float64]
    rotations: npt.NDArray[np.float64]
    evidence: npt.NDArray[np.float64]

    def __post_init__(self):
        if not len(self.locations) == len(self.rotations) == len(self.evidence):
            raise ValueError("Hypothesis arrays must have equal lengths")

    def __len__(self) -> int:
        return len(self.evidence)

    def copy(self) -> ObjectHypotheses:
        return ObjectHypotheses(self.locations.copy(), self.rotations.copy(), self.evidence.copy())

    def select(self, keep: npt.NDArray[np.bool_]) -> ObjectHypotheses:
        return ObjectHypotheses(self.locations[keep], self.rotations[keep], self.evidence[keep])

    @property
    def max_evidence(self) -> float:
        return float(self.evidence.max()) if len(self.evidence) else -np.inf


@dataclass(eq=False)
class HypothesisSpace:
    objects: dict[str, ObjectHypotheses] = field(default_factory=dict)
    sensed_location: tuple[float, float, float] = (0.0, 0.0, 0.0)
    step: int = 0
    stable_pose_steps: int = 0
    last_pose_key: tuple | None = None

    def __len__(self) -> int:
        return sum(len(h) for h in self.objects.values())

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def object_evidence(self) -> dict[str, float]:
        """Best pose evidence of every object that still has hypotheses."""
        return {object_id: h.max_evidence for object_id, h in self.objects.items() if len(h)}

    def copy(self) -> HypothesisSpace:
        return replace(self, objects={object_id: h.copy() for object_id, h in self.objects.items()})

    def hypothesis(self, object_id: str, index: int) -> Hypothesis:
        h = self.objects[object_id]
        return Hypothesis(
            object_id=object_id,
            location=as_tuple(h.locations[index]),
            rotation=Rotation.from_matrix(h.rotations[index]),
            evidence=float(h.evidence[index]),
            index=int(index),
        )


class TerminalKind(str, enum.Enum):
    MATCH = "match"
    NO_MATCH = "no_match"
    TIME_OUT = "time_out"
    CONTINUE = "continue"


@dataclass(frozen=True)
class TerminalState:
    kind: TerminalKind
    hypothesis: Hypothesis | None = None
    symmetric: bool = False

    @property
    def done(self) -> bool:
        return self.kind is not TerminalKind.CONTINUE


def _sensed_frame_arrays(msg: StateMessage) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    frame = msg.morphological_features
    return as_vec3(frame.point_normal), as_vec3(frame.curvature_dir_1)


def init_hypotheses(
    models: Mapping[str, ObjectModel], first_msg: StateMessage, config: LMConfig
) -> HypothesisSpace:
    """Hypotheses at every node of every model, with the rotations aligning the node frame to the sensed one.

    The initial evidence of each hypothesis is the feature evidence of its node.
    """
    if not first_msg.use_state:
        raise ValueError("Hypotheses can only be initialized from a used observation")
    sensed_degenerate = is_degenerate(first_msg.non_morphological_features)
    space = HypothesisSpace(sensed_location=first_msg.location, step=1)
    for object_id, model in models.items():
        if not len(model):
            space.objects[object_id] = ObjectHypotheses(np.zeros((0, 3)), np.zeros((0, 3, 3)), np.zeros(0))
            continue
        matrices, node_index = align_frame_matrices(
            first_msg.morphological_features,
            model.normals,
            model.curvature_dirs,
            model.degenerate | sensed_degenerate,
            config.n_degenerate_rotations,
        )
        node_evidence = feature_evidence_array(
            first_msg.non_morphological_features,
            model.feature_arrays(config.feature_weights),
            len(model),
            config,
        )
        space.objects[object_id] = ObjectHypotheses(
            model.locations[node_index].copy(), matrices, node_evidence[node_index].copy()
        )
    logger.debug(f"Initialized {len(space)} hypotheses over {len(models)} objects")
    return space


def evidence_deltas(
    hypotheses: ObjectHypotheses,
    model: ObjectModel,
    displacement: npt.NDArray[np.float64],
    msg: StateMessage,
    config: LMConfig,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Search locations and evidence deltas (in [-1, 2]) of one object's hypotheses after a move."""
    rotations_t = np.swapaxes(hypotheses.rotations, -1, -2)
    # body-frame vectors are brought into each hypothesis' model frame with R^T
    search = hypotheses.locations + rotations_t @ displacement
    counts, hyp_index, node_index = model.query_radius(search, config.max_match_distance)
    deltas = np.full(len(hypotheses), -1.0)
    if len(node_index):
        normal, direction = _sensed_frame_arrays(msg)
        model_normals = rotations_t @ normal
        model_dirs = rotations_t @ direction
        degenerate = model.degenerate[node_index] | is_degenerate(msg.non_morphological_features)
        morphology = morphology_evidence_array(
            model_normals[hyp_index],
            model_dirs[hyp_index],
            model.normals[node_index],
            model.curvature_dirs[node_index],
            degenerate,
        )
        node_features = feature_evidence_array(
            msg.non_morphological_features, model.feature_arrays(config.feature_weights), len(model), config
        )
        best = np.full(len(hypotheses), -np.inf)
        np.maximum.at(best, hyp_index, morphology + node_features[node_index])
        deltas = np.where(counts > 0, best, -1.0)
    return search, deltas


def update_evidence(
    space: HypothesisSpace,
    displacement: Displacement,
    msg: StateMessage,
    models: Mapping[str, ObjectModel],
    config: LMConfig,
    executor: Executor | None = None,
) -> HypothesisSpace:
    """Move every hypothesis by the sensed displacement and add the evidence of its best neighbor.

    Per-object updates are independent and run on `executor` when one is given.
    """
    vector = displacement.vector
    if not np.all(np.isfinite(vector)):
        raise ValueError("Displacement must be finite")
    if not msg.use_state:
        raise ValueError("Evidence can only be updated from a used observation")
    object_ids = [object_id for object_id, h in space.objects.items() if len(h)]

    def _update(object_id: str):
        return evidence_deltas(space.objects[object_id], models[object_id], vector, msg, config)

    if executor is None:
        results = [_update(object_id) for object_id in object_ids]
    else:
        results = list(executor.map(_update, object_ids))

    updated = space.copy()
    updated.sensed_location = msg.location
    updated.step = space.step + 1
    for object_id, (search, deltas) in zip(object_ids, results, strict=True):
        h = updated.objects[object_id]
        h.locations = search
        h.evidence = h.evidence + deltas
    if config.prune_below is not None:
        prune(updated, config.prune_below)
    track_pose_stability(updated, config)
    return updated


def prune(space: HypothesisSpace, below: float) -> None:
    """Drop, in place, hypotheses more than `below` under the global maximum evidence."""
    evidence = space.object_evidence()
    if not evidence:
        return
    cutoff = max(evidence.values()) - below
    for object_id, h in space.objects.items():
        space.objects[object_id] = h.select(h.evidence >= cutoff)


def possible_matches(space: HypothesisSpace, config: LMConfig) -> set[str]:
    """Objects with positive evidence within `percent_threshold` of the best object."""
    evidence = space.object_evidence()
    if not evidence:
        return set()
    cutoff = max(evidence.values()) * (1.0 - config.percent_threshold)
    return {object_id for object_id, value in evidence.items() if value > 0 and value >= cutoff}


def possible_poses(space: HypothesisSpace, object_id: str, config: LMConfig) -> npt.NDArray[np.intp]:
    h = space.objects[object_id]
    if not len(h):
        return np.zeros(0, dtype=np.intp)
    best = h.max_evidence
    return np.flatnonzero((h.evidence > 0) & (h.evidence >= best * (1.0 - config.percent_threshold)))


def most_likely_hypothesis(space: HypothesisSpace) -> Hypothesis:
    """Global evidence argmax; ties go to the lexicographically first object id, then the lowest index."""
    best_id, best_index, best_value = None, -1, -np.inf
    for object_id in sorted(space.objects):
        h = space.objects[object_id]
        if not len(h):
            continue
        index = int(np.argmax(h.evidence))
        if h.evidence[index] > best_value:
            best_id, best_index, best_value = object_id, index, float(h.evidence[index])
    if best_id is None:
        raise EmptyHypothesisSpaceError("The hypothesis space is empty")
    return space.hypothesis(best_id, best_index)


def _object_translations(h: ObjectHypotheses, sensed: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return sensed - np.einsum("kij,kj->ki", h.rotations, h.locations)


def pose_cluster(
    space: HypothesisSpace, mlh: Hypothesis, indices: npt.NDArray[np.intp], config: LMConfig
) -> bool:
    """Whether all given poses of the MLH object lie within the pose tolerances of the MLH."""
    h = space.objects[mlh.object_id]
    sensed = as_vec3(space.sensed_location)
    translations = _object_translations(h, sensed)[indices]
    reference = mlh.object_pose(sensed)
    close = np.linalg.norm(translations - reference.position, axis=1) <= config.pose_distance
    aligned = rotation_distance(h.rotations[indices], reference.orientation.matrix) <= config.pose_angle
    return bool(np.all(close & aligned))


def track_pose_stability(space: HypothesisSpace, config: LMConfig) -> None:
    """Count consecutive steps over which a single possible object kept the same possible poses."""
    possible = possible_matches(space, config)
    key = None
    if len(possible) == 1:
        object_id = next(iter(possible))
        key = (object_id, tuple(possible_poses(space, object_id, config).tolist()))
    if key is not None and key == space.last_pose_key:
        space.stable_pose_steps += 1
    else:
        space.stable_pose_steps = 0
    space.last_pose_key = key


def check_terminal(space: HypothesisSpace | None, step: int, config: LMConfig) -> TerminalState:
    if step >= config.max_steps:
        return TerminalState(TerminalKind.TIME_OUT)
    if step < config.min_steps:
        return TerminalState(TerminalKind.CONTINUE)
    possible = possible_matches(space, config) if space is not None else set()
    if not possible:
        return TerminalState(TerminalKind.NO_MATCH)
    if len(possible) == 1:
        mlh = most_likely_hypothesis(space)
        poses = possible_poses(space, mlh.object_id, config)
        if mlh.object_id in possible and pose_cluster(space, mlh, poses, config):
            return TerminalState(TerminalKind.MATCH, mlh)
        if space.stable_pose_steps >= config.symmetry_steps:
            return TerminalState(TerminalKind.MATCH, mlh, symmetric=True)
    return TerminalState(TerminalKind.CONTINUE)


def detected_pose(space: HypothesisSpace, hypothesis: Hypothesis) -> Pose:
    return hypothesis.object_pose(as_vec3(space.sensed_location))


def lm_output(space: HypothesisSpace, msg: StateMessage, sender_id: str = "lm") -> StateMessage:
    """The most likely object (as the `object_id` feature) at its most likely pose in the body frame."""
    mlh = most_likely_hypothesis(space)
    pose = mlh.object_pose(msg.position)
    evidence = space.object_evidence()
    best = evidence[mlh.object_id]
    others = [value for object_id, value in evidence.items() if object_id != mlh.object_id]
    if best <= 0:
        confidence = 0.0
    elif not others:
        confidence = 1.0
    else:
        confidence = float(np.clip((best - max(others)) / abs(best), 0.0, 1.0))
    return StateMessage(
        location=pose.location,
        morphological_features=mlh.rotation,
        non_morphological_features={"object_id": mlh.object_id, "evidence": (mlh.evidence,)},
        confidence=confidence,
        use_state=True,
        sender_id=sender_id,
        sender_type=SenderType.LM,
    )
