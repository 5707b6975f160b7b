from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from evidence_recognizer.exceptions import ConfigError


@dataclass(kw_only=True)
class VoteConfig:
    """How votes are emitted and integrated.

    Args:
        top_fraction: Fraction of the highest-evidence hypotheses sent as votes. Defaults to 0.2.
        radius: Model-frame radius (m) in which votes support a hypothesis. Defaults to 0.01.
        max_rotation_deg: Votes whose rotation differs more than this from the hypothesis are ignored.
            Defaults to 30.
    """

    top_fraction: float = 0.2
    radius: float = 0.01
    max_rotation_deg: float = 30.0

    def __post_init__(self):
        if not 0 < self.top_fraction <= 1:
            raise ConfigError("Valid top_fraction value is in (0, 1]")
        if self.radius <= 0:
            raise ConfigError("Valid radius value is greater than 0")
        if not 0 <= self.max_rotation_deg <= 180:
            raise ConfigError("Valid max_rotation_deg value is in [0, 180]")

    @property
    def max_rotation(self) -> float:
        return math.radians(self.max_rotation_deg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "top_fraction": self.top_fraction,
            "radius": self.radius,
            "max_rotation_deg": self.max_rotation_deg,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> VoteConfig:
        return cls(**data)


@dataclass(kw_only=True)
class LMConfig:
    """Parameters of an evidence learning module. None of the defaults come from measurements.

    Args:
        max_match_distance: Radius (m) of the nearest-neighbor search around a hypothesis location.
        feature_tolerances: Per-feature distance at which a feature stops adding evidence. Also used
            to decide whether two nearby observations are duplicates.
        feature_weights: Per-feature weight of the feature evidence; empty or summing to 1.
        percent_threshold: Relative distance to the maximum evidence within which objects and poses
            stay possible.
        n_degenerate_rotations: Rotations sampled about the normal when curvature directions are
            undefined.
        dedup_distance: Observations closer than this (m) to a similar node are not stored.
        max_steps: LM steps after which the episode times out.
        min_steps: LM steps before a match or no-match can be declared.
        pose_distance: Translation tolerance (m) of the pose-convergence test.
        pose_angle_deg: Rotation tolerance (degrees) of the pose-convergence test.
        symmetry_steps: Consecutive steps with an unchanged set of possible poses after which the
            object is considered symmetric and matched.
        prune_below: If set, hypotheses more than this below the global maximum are dropped.
        vote: Vote emission and integration parameters.
    """

    max_match_distance: float = 0.01
    feature_tolerances: dict[str, float] = field(
        default_factory=lambda: {"rgba": 0.2, "principal_curvatures": 5.0}
    )
    feature_weights: dict[str, float] = field(
        default_factory=lambda: {"rgba": 0.5, "principal_curvatures": 0.5}
    )
    percent_threshold: float = 0.2
    n_degenerate_rotations: int = 8
    dedup_distance: float = 0.005
    max_steps: int = 500
    min_steps: int = 3
    pose_distance: float = 0.01
    pose_angle_deg: float = 10.0
    symmetry_steps: int = 5
    prune_below: float | None = None
    vote: VoteConfig = field(default_factory=VoteConfig)

    def __post_init__(self):
        if self.max_match_distance <= 0:
            raise ConfigError("Valid max_match_distance value is greater than 0")
        if not 0 < self.percent_threshold < 1:
            raise ConfigError("Valid percent_threshold value is in (0, 1)")
        if any(w < 0 for w in self.feature_weights.values()):
            raise ConfigError("Valid feature weights are greater than or equal to 0")
        if self.feature_weights and abs(sum(self.feature_weights.values()) - 1.0) > 1e-9:
            raise ConfigError("Valid feature weights sum to 1")
        missing = sorted(set(self.feature_weights) - set(self.feature_tolerances))
        if missing:
            raise ConfigError(f"Weighted features {missing} have no tolerance")
        if any(t <= 0 for t in self.feature_tolerances.values()):
            raise ConfigError("Valid feature tolerances are greater than 0")
        if self.n_degenerate_rotations < 1:
            raise ConfigError("Valid n_degenerate_rotations value is greater than or equal to 1")
        if self.dedup_distance < 0:
            raise ConfigError("Valid dedup_distance value is greater than or equal to 0")
        if not 1 <= self.min_steps <= self.max_steps:
            raise ConfigError("Valid step limits satisfy 1 <= min_steps <= max_steps")
        if self.symmetry_steps < 1:
            raise ConfigError("Valid symmetry_steps value is greater than or equal to 1")
        if self.prune_below is not None and self.prune_below <= 0:
            raise ConfigError("Valid prune_below value is greater than 0 or None")
        if isinstance(self.vote, dict):
            self.vote = VoteConfig.from_dict(self.vote)

    @property
    def pose_angle(self) -> float:
        return math.radians(self.pose_angle_deg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_match_distance": self.max_match_distance,
            "feature_tolerances": dict(self.feature_tolerances),
            "feature_weights": dict(self.feature_weights),
            "percent_threshold": self.percent_threshold,
            "n_degenerate_rotations": self.n_degenerate_rotations,
            "dedup_distance": self.dedup_distance,
            "max_steps": self.max_steps,
            "min_steps": self.min_steps,
            "pose_distance": self.pose_distance,
            "pose_angle_deg": self.pose_angle_deg,
            "symmetry_steps": self.symmetry_steps,
            "prune_below": self.prune_below,
            "vote": self.vote.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LMConfig:
        return cls(**data)
