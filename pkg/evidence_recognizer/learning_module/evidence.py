"""Evidence contributed by a single observation: features add in [0, 1], morphology adds in [-1, 1]."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from evidence_recognizer.exceptions import UnknownFeatureError
from evidence_recognizer.geometry import as_vec3

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    import numpy.typing as npt

    from evidence_recognizer.geometry import SurfaceFrame
    from evidence_recognizer.learning_module.config import LMConfig
    from evidence_recognizer.learning_module.graph import GraphNode

DEGENERATE_FEATURE = "curvature_degenerate"


def _feature_vector(features: Mapping[str, Sequence[float] | str], name: str, owner: str):
    if name not in features:
        raise UnknownFeatureError(f"Feature {name!r} is missing from the {owner} features")
    value = features[name]
    if isinstance(value, str):
        raise UnknownFeatureError(f"Feature {name!r} is symbolic and cannot be compared")
    return np.asarray(value, dtype=np.float64)


def feature_evidence(
    sensed: Mapping[str, Sequence[float] | str], stored: Mapping[str, Sequence[float] | str], config: LMConfig
) -> float:
    """Weighted sum over features of max(0, 1 - distance / tolerance)."""
    total = 0.0
    for name, weight in config.feature_weights.items():
        if name not in config.feature_tolerances:
            raise UnknownFeatureError(f"No tolerance configured for feature {name!r}")
        delta = _feature_vector(sensed, name, "sensed") - _feature_vector(stored, name, "stored")
        distance = np.linalg.norm(delta)
        total += weight * max(0.0, 1.0 - float(distance) / config.feature_tolerances[name])
    return float(total)


def feature_evidence_array(
    sensed: Mapping[str, Sequence[float] | str],
    stored: Mapping[str, npt.NDArray[np.float64]],
    count: int,
    config: LMConfig,
) -> npt.NDArray[np.float64]:
    """`feature_evidence` of one sensed feature map against `count` stored nodes.

    `stored` holds one (count, dim) array per feature.
    """
    total = np.zeros(count)
    for name, weight in config.feature_weights.items():
        if name not in config.feature_tolerances:
            raise UnknownFeatureError(f"No tolerance configured for feature {name!r}")
        if name not in stored:
            raise UnknownFeatureError(f"Feature {name!r} is missing from the stored features")
        distance = np.linalg.norm(stored[name] - _feature_vector(sensed, name, "sensed"), axis=-1)
        total += weight * np.maximum(0.0, 1.0 - distance / config.feature_tolerances[name])
    return total


def is_degenerate(features: Mapping[str, Sequence[float] | str]) -> bool:
    value = features.get(DEGENERATE_FEATURE)
    return value is not None and not isinstance(value, str) and float(value[0]) > 0.5


def morphology_evidence_array(
    sensed_normals: npt.NDArray[np.float64],
    sensed_dirs: npt.NDArray[np.float64],
    stored_normals: npt.NDArray[np.float64],
    stored_dirs: npt.NDArray[np.float64],
    degenerate: npt.NDArray[np.bool_] | bool,
) -> npt.NDArray[np.float64]:
    """0.5 * cos(normal angle) + 0.5 * cos(2 * curvature-direction angle), or the normal term alone."""
    normal_term = np.clip(np.einsum("...i,...i->...", sensed_normals, stored_normals), -1.0, 1.0)
    dir_cos = np.clip(np.einsum("...i,...i->...", sensed_dirs, stored_dirs), -1.0, 1.0)
    # the max-curvature direction is only defined up to sign, cos(2a) = 2cos(a)^2 - 1 folds it
    combined = 0.5 * normal_term + 0.5 * (2.0 * dir_cos**2 - 1.0)
    return np.where(degenerate, normal_term, combined)


def morphology_evidence(sensed: SurfaceFrame, stored: GraphNode, sensed_degenerate: bool = False) -> float:
    """Agreement in [-1, 1] of a sensed frame with a stored node, both expressed in the same frame."""
    degenerate = sensed_degenerate or is_degenerate(stored.features)
    return float(
        morphology_evidence_array(
            as_vec3(sensed.point_normal),
            as_vec3(sensed.curvature_dir_1),
            as_vec3(stored.frame.point_normal),
            as_vec3(stored.frame.curvature_dir_1),
            degenerate,
        )
    )
