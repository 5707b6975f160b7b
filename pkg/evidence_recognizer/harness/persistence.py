from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

from evidence_recognizer.exceptions import ConfigError, RecognizerException, SchemaError
from evidence_recognizer.harness.config import ExperimentConfig
from evidence_recognizer.harness.experiment import build_state
from evidence_recognizer.learning_module.graph import GraphMemory

if TYPE_CHECKING:
    from collections.abc import Sequence

    from evidence_recognizer.harness.experiment import EpisodeResult, ExperimentState

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXPERIMENT_FILE = "experiment.json"
RESULT_FIELDS = [
    "episode",
    "label",
    "rotation_quat",
    "terminal",
    "total_steps",
    "lm_steps",
    "detected_object",
    "rotation_error",
    "symmetric",
    "learned_graph",
]


def _dump(data: dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _model_file(lm_id: str) -> str:
    return f"lm_{lm_id}.json"


def save_state(state: ExperimentState, path: str | Path) -> None:
    """Write the experiment config and one model file per LM into the directory `path`."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / EXPERIMENT_FILE).write_text(
        _dump(
            {
                "schema_version": SCHEMA_VERSION,
                "config": state.config.to_dict(),
                "episodes_run": state.episodes_run,
            }
        )
    )
    for lm_id, lm in state.lms.items():
        (path / _model_file(lm_id)).write_text(
            _dump({"schema_version": SCHEMA_VERSION, "lm_id": lm_id, "memory": lm.memory.to_dict()})
        )
    logger.debug(f"Saved {len(state.lms)} model files to {path}")


def _read(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"{path} does not have schema version {SCHEMA_VERSION}")
    return data


def load_memories(path: str | Path) -> dict[str, GraphMemory]:
    """Read every LM model file of a saved state directory."""
    path = Path(path)
    memories = {}
    for model_file in sorted(path.glob("lm_*.json")):
        data = _read(model_file)
        try:
            memories[str(data["lm_id"])] = GraphMemory.from_dict(data["memory"])
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError, RecognizerException) as e:
            raise SchemaError(f"{model_file} is not a valid model file: {e!r}") from e
    return memories


def load_state(path: str | Path, config: ExperimentConfig | None = None) -> ExperimentState:
    """Rebuild a saved state; everything is parsed before anything is built.

    Args:
        path: Directory written by `save_state`.
        config: Replaces the saved config (e.g. to evaluate saved models), keeping the saved memories.
    """
    path = Path(path)
    data = _read(path / EXPERIMENT_FILE)
    try:
        saved_config = ExperimentConfig.from_dict(data["config"])
        episodes_run = int(data["episodes_run"])
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{path / EXPERIMENT_FILE} is not a valid experiment file: {e!r}") from e
    memories = load_memories(path)
    config = config or saved_config
    missing = sorted({wiring.lm_id for wiring in saved_config.lms} - set(memories))
    if missing:
        raise SchemaError(f"Missing model files for {missing}")
    unknown = sorted({wiring.lm_id for wiring in config.lms} - set(memories))
    if unknown:
        raise ConfigError(f"No saved models for {unknown}")
    state = build_state(config, memories)
    state.episodes_run = episodes_run
    return state


def write_results_csv(results: Sequence[EpisodeResult], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RESULT_FIELDS)
        writer.writeheader()
        for result in results:
            writer.writerow(result.to_row())


def write_traces_jsonl(results: Sequence[EpisodeResult], path: str | Path) -> None:
    with open(path, "w") as f:
        for result in results:
            for row in result.trace:
                f.write(json.dumps({"episode": result.episode, **row}, sort_keys=True) + "\n")
