from __future__ import annotations

from collections import Counter
from typing import TYPE_CHECKING, Any

import numpy as np

from evidence_recognizer.learning_module.hypotheses import TerminalKind

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from evidence_recognizer.harness.experiment import EpisodeResult
    from evidence_recognizer.learning_module.graph import GraphMemory


def label_mapping(memory: GraphMemory) -> dict[str, str]:
    """Map every learned graph to the ground-truth label it was most often learned from.

    Ties go to the label seen first.
    """
    votes: dict[str, Counter[str]] = {}
    for graph_id, label in zip(memory.learned_ids, memory.ground_truth_labels, strict=True):
        votes.setdefault(graph_id, Counter())[label] += 1
    return {graph_id: counts.most_common(1)[0][0] for graph_id, counts in votes.items()}


def compute_metrics(
    results: Sequence[EpisodeResult], mapping: Mapping[str, str] | None = None
) -> dict[str, Any]:
    """Accuracy, rotation error statistics, step counts and a confusion table.

    Args:
        results: Episode results, at least one.
        mapping: Graph id to label. Graphs missing from it are compared by id.
    """
    if not results:
        raise ValueError("At least one result is required")
    mapping = mapping or {}
    confusion: dict[str, dict[str, int]] = {}
    correct = 0
    errors = []
    for result in results:
        if result.terminal is TerminalKind.MATCH:
            predicted = mapping.get(result.detected_object, result.detected_object)
            correct += predicted == result.label
            if result.rotation_error is not None:
                errors.append(result.rotation_error)
        else:
            predicted = result.terminal.value
        row = confusion.setdefault(result.label, {})
        row[predicted] = row.get(predicted, 0) + 1
    counts = Counter(result.terminal.value for result in results)
    return {
        "episodes": len(results),
        "accuracy": correct / len(results),
        "match": counts.get(TerminalKind.MATCH.value, 0),
        "no_match": counts.get(TerminalKind.NO_MATCH.value, 0),
        "time_out": counts.get(TerminalKind.TIME_OUT.value, 0),
        "mean_rotation_error": float(np.mean(errors)) if errors else None,
        "median_rotation_error": float(np.median(errors)) if errors else None,
        "mean_total_steps": float(np.mean([result.total_steps for result in results])),
        "mean_lm_steps": float(np.mean([result.lm_steps for result in results])),
        "confusion": confusion,
    }
