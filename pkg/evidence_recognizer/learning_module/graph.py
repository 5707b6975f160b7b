from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from sklearn.neighbors import KDTree

from evidence_recognizer.exceptions import EmptyBufferError, InvalidFrameError, MissingModelError, SchemaError
from evidence_recognizer.geometry import Pose, Rotation, SurfaceFrame, as_tuple, as_vec3
from evidence_recognizer.learning_module.evidence import DEGENERATE_FEATURE

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence

    import numpy.typing as npt

    from evidence_recognizer.cmp import StateMessage
    from evidence_recognizer.environment.agent import Action
    from evidence_recognizer.learning_module.config import LMConfig

logger = logging.getLogger(__name__)

NEW_OBJECT_PREFIX = "new_object_"


@dataclass(frozen=True)
class BufferEntry:
    message: StateMessage
    action: Action | None = None


@dataclass(frozen=True)
class GraphNode:
    location: tuple[float, float, float]
    frame: SurfaceFrame
    features: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.frame.is_orthonormal():
            raise InvalidFrameError("Graph node frames must be orthonormal")

    @classmethod
    def from_message(cls, msg: StateMessage) -> GraphNode:
        return cls(
            location=msg.location,
            frame=msg.morphological_features,
            features={
                name: tuple(value)
                for name, value in msg.non_morphological_features.items()
                if not isinstance(value, str)
            },
        )

    def transformed(self, pose: Pose) -> GraphNode:
        """The node as seen through `pose` (rotation then translation)."""
        location = pose.orientation.apply(self.location) + pose.position
        return GraphNode(as_tuple(location), self.frame.rotated(pose.orientation), dict(self.features))

    def to_dict(self) -> dict[str, Any]:
        return {
            "location": list(self.location),
            "frame": self.frame.as_matrix().tolist(),
            "features": {name: list(value) for name, value in self.features.items()},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GraphNode:
        return cls(
            location=as_tuple(data["location"]),
            frame=SurfaceFrame.from_matrix(data["frame"]),
            features={name: as_tuple(value) for name, value in data["features"].items()},
        )


class ObjectModel:
    """Graph of observed surface points of one object, in the object's model reference frame.

    Args:
        object_id (str): Graph id, a ground-truth label or `new_object_<k>`.
        nodes (Iterable[GraphNode], optional): Initial nodes, inserted without deduplication.
        edges (Iterable[tuple[int, int]], optional): Temporal links between node indices.
    """

    logger = logging.getLogger(__name__)

    def __init__(
        self, object_id: str, nodes: Iterable[GraphNode] = (), edges: Iterable[tuple[int, int]] = ()
    ):
        self.object_id = object_id
        self.nodes: list[GraphNode] = list(nodes)
        self.edges: list[tuple[int, int]] = [(int(a), int(b)) for a, b in edges]
        self._index: KDTree | None = None
        self._arrays: dict[str, npt.NDArray[np.float64]] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"ObjectModel({self.object_id!r}, nodes={len(self.nodes)}, edges={len(self.edges)})"

    def _invalidate(self) -> None:
        self._index = None
        self._arrays = {}

    def _array(self, key: str, build) -> npt.NDArray[np.float64]:
        if key not in self._arrays:
            self._arrays[key] = build()
        return self._arrays[key]

    @property
    def locations(self) -> npt.NDArray[np.float64]:
        return self._array("locations", lambda: np.array([n.location for n in self.nodes]).reshape(-1, 3))

    @property
    def normals(self) -> npt.NDArray[np.float64]:
        return self._array(
            "normals", lambda: np.array([n.frame.point_normal for n in self.nodes]).reshape(-1, 3)
        )

    @property
    def curvature_dirs(self) -> npt.NDArray[np.float64]:
        return self._array(
            "curvature_dirs", lambda: np.array([n.frame.curvature_dir_1 for n in self.nodes]).reshape(-1, 3)
        )

    @property
    def degenerate(self) -> npt.NDArray[np.bool_]:
        return self._array(
            "degenerate",
            lambda: np.array(
                [float(n.features.get(DEGENERATE_FEATURE, (0.0,))[0]) > 0.5 for n in self.nodes], dtype=bool
            ),
        )

    def feature_array(self, name: str) -> npt.NDArray[np.float64] | None:
        if not self.nodes or any(name not in n.features for n in self.nodes):
            return None
        return self._array(f"feature:{name}", lambda: np.array([n.features[name] for n in self.nodes]))

    def feature_arrays(self, names: Iterable[str]) -> dict[str, npt.NDArray[np.float64]]:
        arrays = {}
        for name in names:
            array = self.feature_array(name)
            if array is not None:
                arrays[name] = array
        return arrays

    @property
    def index(self) -> KDTree:
        if self._index is None:
            self._index = KDTree(self.locations if self.nodes else np.zeros((0, 3)))
        return self._index

    def query_radius(
        self, points: npt.NDArray[np.float64], radius: float
    ) -> tuple[npt.NDArray[np.intp], npt.NDArray[np.intp], npt.NDArray[np.intp]]:
        """Neighbors of many points, flattened.

        Returns:
            counts per point, the point index of every (point, node) pair and the node index of every pair.
        """
        points = np.atleast_2d(points)
        if not self.nodes or len(points) == 0:
            empty = np.zeros(0, dtype=np.intp)
            return np.zeros(len(points), dtype=np.intp), empty, empty
        neighbors = self.index.query_radius(points, r=radius)
        counts = np.array([len(n) for n in neighbors], dtype=np.intp)
        point_index = np.repeat(np.arange(len(points)), counts)
        node_index = np.concatenate(neighbors).astype(np.intp) if counts.sum() else np.zeros(0, dtype=np.intp)
        return counts, point_index, node_index

    def is_duplicate(self, candidate: GraphNode, config: LMConfig) -> bool:
        """Whether a node within `dedup_distance` has every feature closer than its tolerance."""
        if not self.nodes:
            return False
        distances = np.linalg.norm(self.locations - as_vec3(candidate.location), axis=1)
        for index in np.flatnonzero(distances <= config.dedup_distance):
            stored = self.nodes[index]
            similar = True
            for name, tolerance in config.feature_tolerances.items():
                if name in candidate.features and name in stored.features:
                    difference = np.linalg.norm(
                        np.asarray(candidate.features[name]) - np.asarray(stored.features[name])
                    )
                    if difference >= tolerance:
                        similar = False
                        break
            if similar:
                return True
        return False

    def add_node(self, candidate: GraphNode, config: LMConfig, previous: int | None = None) -> int | None:
        """Insert `candidate` unless it duplicates a node; returns its index or None if skipped."""
        if self.is_duplicate(candidate, config):
            return None
        self.nodes.append(candidate)
        index = len(self.nodes) - 1
        if previous is not None:
            self.edges.append((previous, index))
        self._invalidate()
        return index

    def copy(self) -> ObjectModel:
        return ObjectModel(self.object_id, self.nodes, self.edges)

    def to_dict(self) -> dict[str, Any]:
        return {
            "object_id": self.object_id,
            "nodes": [node.to_dict() for node in self.nodes],
            "edges": [list(edge) for edge in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ObjectModel:
        nodes = [GraphNode.from_dict(node) for node in data["nodes"]]
        edges = [tuple(edge) for edge in data["edges"]]
        if any(not (0 <= a < len(nodes) and 0 <= b < len(nodes)) for a, b in edges):
            raise SchemaError(f"Model {data['object_id']!r} has edges referencing missing nodes")
        return cls(str(data["object_id"]), nodes, edges)


def _used_messages(buffer: Sequence[BufferEntry]) -> list[StateMessage]:
    return [entry.message for entry in buffer if entry.message.use_state]


def _insert_all(model: ObjectModel, nodes: Iterable[GraphNode], config: LMConfig) -> int:
    previous = None
    added = 0
    for node in nodes:
        index = model.add_node(node, config, previous)
        if index is not None:
            previous = index
            added += 1
    return added


def build_graph(buffer: Sequence[BufferEntry], config: LMConfig, object_id: str) -> ObjectModel:
    """Build a new model from the used observations of an episode, in body-frame coordinates."""
    messages = _used_messages(buffer)
    if not messages:
        raise EmptyBufferError("Cannot build a graph from a buffer without used observations")
    model = ObjectModel(object_id)
    added = _insert_all(model, (GraphNode.from_message(msg) for msg in messages), config)
    logger.debug(f"Built {object_id} with {added} nodes from {len(messages)} observations")
    return model


def update_graph(
    model: ObjectModel, buffer: Sequence[BufferEntry], detected_pose: Pose, config: LMConfig
) -> ObjectModel:
    """Add the buffered observations to a copy of `model`.

    Args:
        model: The model the observations belong to.
        buffer: Buffered observations in the body frame.
        detected_pose: Pose of the model reference frame in the body frame (model to body).
        config: Dedup parameters.
    """
    matrix = detected_pose.orientation.matrix
    if abs(np.linalg.det(matrix) - 1.0) > 1e-6 or not np.all(np.isfinite(detected_pose.position)):
        raise InvalidFrameError("The detected pose is not a valid rigid transform")
    to_model = detected_pose.inverse()
    updated = model.copy()
    messages = _used_messages(buffer)
    nodes = (GraphNode.from_message(msg).transformed(to_model) for msg in messages)
    added = _insert_all(updated, nodes, config)
    logger.debug(f"Updated {model.object_id}: {added} of {len(messages)} observations added")
    return updated


@dataclass
class GraphMemory:
    """Long-term memory of one learning module.

    `learned_ids` and `ground_truth_labels` record, per training episode, which graph was learned or
    updated and what the object actually was. They are only used for analysis.
    """

    models: dict[str, ObjectModel] = field(default_factory=dict)
    learned_ids: list[str] = field(default_factory=list)
    ground_truth_labels: list[str] = field(default_factory=list)
    learning_poses: dict[str, Pose] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self) -> Iterator[str]:
        return iter(self.models)

    def __contains__(self, object_id: object) -> bool:
        return object_id in self.models

    def get(self, object_id: str) -> ObjectModel:
        try:
            return self.models[object_id]
        except KeyError:
            raise MissingModelError(f"No model named {object_id!r} in memory") from None

    def put(self, model: ObjectModel, learning_pose: Pose | None = None) -> None:
        self.models[model.object_id] = model
        if learning_pose is not None and model.object_id not in self.learning_poses:
            self.learning_poses[model.object_id] = learning_pose

    def new_object_id(self) -> str:
        taken = sum(1 for object_id in self.models if object_id.startswith(NEW_OBJECT_PREFIX))
        while f"{NEW_OBJECT_PREFIX}{taken}" in self.models:
            taken += 1
        return f"{NEW_OBJECT_PREFIX}{taken}"

    def record(self, graph_id: str, label: str) -> None:
        self.learned_ids.append(graph_id)
        self.ground_truth_labels.append(label)

    def to_dict(self) -> dict[str, Any]:
        return {
            "models": [model.to_dict() for model in self.models.values()],
            "learned_ids": list(self.learned_ids),
            "ground_truth_labels": list(self.ground_truth_labels),
            "learning_poses": {
                object_id: {"location": list(pose.location), "quat": list(pose.orientation.quat)}
                for object_id, pose in self.learning_poses.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GraphMemory:
        models = [ObjectModel.from_dict(model) for model in data["models"]]
        learned_ids = [str(v) for v in data["learned_ids"]]
        labels = [str(v) for v in data["ground_truth_labels"]]
        if len(learned_ids) != len(labels):
            raise SchemaError("The bookkeeping lists have different lengths")
        return cls(
            models={model.object_id: model for model in models},
            learned_ids=learned_ids,
            ground_truth_labels=labels,
            learning_poses={
                object_id: Pose(as_tuple(pose["location"]), Rotation(tuple(float(v) for v in pose["quat"])))
                for object_id, pose in data["learning_poses"].items()
            },
        )
