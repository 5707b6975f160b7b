from __future__ import annotations

import pytest

from evidence_recognizer.exceptions import ConfigError
from evidence_recognizer.harness.benchmarks import SUITES, run_suite


def test_unknown_suite():
    with pytest.raises(ConfigError):
        run_suite("everything")
    assert sorted(SUITES) == ["hypothesis-testing", "recognition", "unsupervised", "voting"]


@pytest.mark.benchmark
def test_unsupervised_learning_recognizes_the_second_view():
    metrics = run_suite("unsupervised").metrics
    assert metrics["terminals"] == ["no_match", "match"]
    assert metrics["models_after_episode"] == [1, 1]
    assert metrics["learned_graphs"] == ["new_object_0", "new_object_0"]


@pytest.mark.benchmark
def test_recognition_at_held_out_rotations():
    metrics = run_suite("recognition").metrics
    assert metrics["accuracy"] >= 0.9
    assert metrics["median_rotation_error"] <= 10.0
    assert metrics["new_object_matches"] == 0


@pytest.mark.benchmark
def test_voting_needs_fewer_steps():
    metrics = run_suite("voting").metrics
    assert metrics["speedup"] > 0


@pytest.mark.benchmark
def test_hypothesis_testing_does_not_slow_recognition():
    metrics = run_suite("hypothesis-testing").metrics
    assert metrics["steps_saved"] >= 0
