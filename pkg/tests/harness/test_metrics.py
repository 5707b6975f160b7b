from __future__ import annotations

import pytest

from evidence_recognizer.geometry import Rotation
from evidence_recognizer.harness.experiment import EpisodeResult
from evidence_recognizer.harness.metrics import compute_metrics, label_mapping
from evidence_recognizer.learning_module.graph import GraphMemory
from evidence_recognizer.learning_module.hypotheses import TerminalKind


def _result(label, terminal, detected=None, error=None, steps=10) -> EpisodeResult:
    return EpisodeResult(
        episode=0,
        label=label,
        rotation=Rotation.identity(),
        terminal=terminal,
        total_steps=steps,
        lm_steps=steps - 2,
        detected_object=detected,
        rotation_error=error,
    )


def test_label_mapping_takes_the_most_common_label():
    memory = GraphMemory()
    for graph_id, label in [
        ("new_object_0", "mug"),
        ("new_object_0", "cup"),
        ("new_object_0", "mug"),
        ("new_object_1", "cube"),
        ("new_object_1", "book"),
    ]:
        memory.record(graph_id, label)
    assert label_mapping(memory) == {"new_object_0": "mug", "new_object_1": "cube"}
    assert label_mapping(GraphMemory()) == {}


def test_compute_metrics():
    results = [
        _result("mug", TerminalKind.MATCH, "new_object_0", 4.0, steps=10),
        _result("mug", TerminalKind.MATCH, "new_object_1", 8.0, steps=20),
        _result("cube", TerminalKind.MATCH, "new_object_1", 12.0, steps=30),
        _result("cube", TerminalKind.NO_MATCH, steps=40),
        _result("sphere", TerminalKind.TIME_OUT, steps=50),
    ]
    metrics = compute_metrics(results, {"new_object_0": "mug", "new_object_1": "cube"})
    assert metrics["episodes"] == 5
    assert metrics["accuracy"] == pytest.approx(0.4)
    assert (metrics["match"], metrics["no_match"], metrics["time_out"]) == (3, 1, 1)
    assert metrics["mean_rotation_error"] == pytest.approx(8.0)
    assert metrics["median_rotation_error"] == pytest.approx(8.0)
    assert metrics["mean_total_steps"] == pytest.approx(30.0)
    assert metrics["mean_lm_steps"] == pytest.approx(28.0)
    assert metrics["confusion"] == {
        "mug": {"mug": 1, "cube": 1},
        "cube": {"cube": 1, "no_match": 1},
        "sphere": {"time_out": 1},
    }


def test_compute_metrics_without_mapping_compares_ids():
    results = [_result("mug", TerminalKind.MATCH, "mug"), _result("cube", TerminalKind.MATCH, "mug")]
    metrics = compute_metrics(results)
    assert metrics["accuracy"] == pytest.approx(0.5)
    # matches without a learning pose have no rotation error
    assert metrics["mean_rotation_error"] is None
    assert metrics["median_rotation_error"] is None


def test_compute_metrics_needs_results():
    with pytest.raises(ValueError):
        compute_metrics([])
