from __future__ import annotations

import numpy as np
import pytest

from evidence_recognizer.cmp import SenderType, StateMessage
from evidence_recognizer.environment.scene import Scene
from evidence_recognizer.environment.shapes import Sphere
from evidence_recognizer.geometry import SurfaceFrame, as_tuple
from evidence_recognizer.learning_module.config import LMConfig
from evidence_recognizer.learning_module.graph import GraphNode, ObjectModel


def pytest_runtest_setup(item):
    def _has_marker(item, marker_name: str) -> bool:
        return len(list(item.iter_markers(name=marker_name))) > 0

    markexpr = item.config.getoption("markexpr")
    if markexpr == "":
        if _has_marker(item=item, marker_name="benchmark"):
            pytest.skip("skipping benchmark tests")


GREY = (0.5, 0.5, 0.5, 1.0)


def make_message(
    location=(0.0, 0.0, 0.0),
    normal=(0.0, 0.0, 1.0),
    dir_1=(1.0, 0.0, 0.0),
    *,
    rgba=GREY,
    curvatures=(10.0, 0.0),
    degenerate: bool = False,
    use_state: bool = True,
    confidence: float = 1.0,
    sender_id: str = "patch",
) -> StateMessage:
    normal = np.asarray(normal, dtype=np.float64)
    dir_1 = np.asarray(dir_1, dtype=np.float64)
    return StateMessage(
        location=as_tuple(location),
        morphological_features=SurfaceFrame.from_vectors(normal, dir_1, np.cross(normal, dir_1)),
        non_morphological_features={
            "rgba": tuple(rgba),
            "principal_curvatures": tuple(curvatures),
            "curvature_degenerate": (1.0 if degenerate else 0.0,),
        },
        confidence=confidence,
        use_state=use_state,
        sender_id=sender_id,
        sender_type=SenderType.SM,
    )


def make_node(location, normal=(0.0, 0.0, 1.0), dir_1=(1.0, 0.0, 0.0), **kwargs) -> GraphNode:
    return GraphNode.from_message(make_message(location, normal, dir_1, **kwargs))


def line_colors(count: int) -> list[tuple[float, float, float, float]]:
    """Node colors far enough apart that no two nodes share the rgba feature."""
    return [(0.1 + 0.3 * (i % 3), 0.2 * (i // 3), 0.5, 1.0) for i in range(count)]


def line_model(object_id: str = "line", count: int = 4, spacing: float = 0.02) -> ObjectModel:
    """Nodes along +x with normals +z, each with its own color."""
    colors = line_colors(count)
    return ObjectModel(object_id, [make_node((spacing * i, 0.0, 0.0), rgba=colors[i]) for i in range(count)])


@pytest.fixture
def lm_config() -> LMConfig:
    return LMConfig(max_match_distance=0.005)


@pytest.fixture
def sphere_scene() -> Scene:
    return Scene.single(Sphere(radius=0.04, color=(0.2, 0.7, 0.2, 1.0)), "sphere")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
