from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from evidence_recognizer.exceptions import ConfigError

POLICIES = ("random", "curvature", "spiral")
HYPOTHESIS_TESTING_MODES = ("objects", "poses")


@dataclass(kw_only=True)
class PolicyConfig:
    """Parameters of the motor system.

    Args:
        alpha: Probability of repeating the previous action in the random walk.
        orient_step_deg: Size of a primitive orient action of the distant agent.
        translate_step: Size (m) of a primitive tangential move of the surface agent.
        learning_policy: Model-free policy used in training episodes.
        inference_policy: Model-free policy used in evaluation episodes.
        min_curvature_steps: Steps spent following the minimal curvature before switching.
        max_curvature_steps: Steps spent following the maximal curvature before switching back.
        avoid_radius: Heading within this distance (m) of an older visited location triggers an
            avoidance step.
        avoid_skip_recent: Number of most recent visited locations ignored by the avoidance check.
        spiral_spacing_deg: Distance between two turns of the scan spiral.
        spiral_step_deg: Arc length of one scan step.
        hypothesis_testing: None, "objects" or "poses".
        trigger_ratio: Second-best over best evidence ratio above which a test jump is considered.
        trigger_cooldown: Minimum LM steps between two test jumps.
        view_fraction_range: Band of view-finder on-object pixel fractions accepted as a good view.
        max_utility_steps: Iterations allowed to the utility policies.
        goal_standoff: Distance (m) at which the distant agent is placed in front of a goal location.
        goal_tolerance: Distance (m) within which a surface must be found at a goal location.
    """

    alpha: float = 0.7
    orient_step_deg: float = 3.0
    translate_step: float = 0.004
    learning_policy: str = "spiral"
    inference_policy: str = "random"
    min_curvature_steps: int = 8
    max_curvature_steps: int = 4
    avoid_radius: float = 0.01
    avoid_skip_recent: int = 3
    spiral_spacing_deg: float = 3.0
    spiral_step_deg: float = 2.0
    hypothesis_testing: str | None = None
    trigger_ratio: float = 0.8
    trigger_cooldown: int = 10
    view_fraction_range: tuple[float, float] = (0.3, 0.6)
    max_utility_steps: int = 20
    goal_standoff: float = 0.15
    goal_tolerance: float = 0.01

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ConfigError("Valid alpha value is in [0, 1]")
        for name in ("learning_policy", "inference_policy"):
            if getattr(self, name) not in POLICIES:
                raise ConfigError(f"Valid {name} values are {POLICIES}")
        if self.hypothesis_testing is not None and self.hypothesis_testing not in HYPOTHESIS_TESTING_MODES:
            raise ConfigError(f"Valid hypothesis_testing values are None or {HYPOTHESIS_TESTING_MODES}")
        if self.orient_step_deg <= 0 or self.translate_step <= 0:
            raise ConfigError("Valid step sizes are greater than 0")
        if self.min_curvature_steps < 1 or self.max_curvature_steps < 1:
            raise ConfigError("Valid curvature following periods are greater than 0")
        if self.spiral_spacing_deg <= 0 or self.spiral_step_deg <= 0:
            raise ConfigError("Valid spiral parameters are greater than 0")
        self.view_fraction_range = tuple(self.view_fraction_range)
        low, high = self.view_fraction_range
        if not 0 < low < high <= 1:
            raise ConfigError("Valid view_fraction_range satisfies 0 < low < high <= 1")
        if self.max_utility_steps < 1:
            raise ConfigError("Valid max_utility_steps value is greater than 0")
        if not 0 < self.trigger_ratio <= 1:
            raise ConfigError("Valid trigger_ratio value is in (0, 1]")

    @property
    def view_fraction_target(self) -> float:
        low, high = self.view_fraction_range
        return (low + high) / 2

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "orient_step_deg": self.orient_step_deg,
            "translate_step": self.translate_step,
            "learning_policy": self.learning_policy,
            "inference_policy": self.inference_policy,
            "min_curvature_steps": self.min_curvature_steps,
            "max_curvature_steps": self.max_curvature_steps,
            "avoid_radius": self.avoid_radius,
            "avoid_skip_recent": self.avoid_skip_recent,
            "spiral_spacing_deg": self.spiral_spacing_deg,
            "spiral_step_deg": self.spiral_step_deg,
            "hypothesis_testing": self.hypothesis_testing,
            "trigger_ratio": self.trigger_ratio,
            "trigger_cooldown": self.trigger_cooldown,
            "view_fraction_range": list(self.view_fraction_range),
            "max_utility_steps": self.max_utility_steps,
            "goal_standoff": self.goal_standoff,
            "goal_tolerance": self.goal_tolerance,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PolicyConfig:
        return cls(**data)
