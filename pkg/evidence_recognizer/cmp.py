"""Cortical messaging protocol: the message types every component exchanges, their validation and codec."""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Union

import numpy as np

from evidence_recognizer.exceptions import CodecError
from evidence_recognizer.geometry import FRAME_TOLERANCE, Rotation, SurfaceFrame, as_tuple

if TYPE_CHECKING:
    import numpy.typing as npt

logger = logging.getLogger(__name__)
traffic_logger = logging.getLogger("evidence_recognizer.cmp.traffic")
traffic_logger.propagate = False
traffic_logger.addHandler(logging.NullHandler())

FeatureValue = Union[tuple[float, ...], str]


class SenderType(str, enum.Enum):
    SM = "SM"
    LM = "LM"


@dataclass(frozen=True, kw_only=True)
class StateMessage:
    """A feature at a pose.

    Args:
        location: Location of the feature (or of the object origin for LM outputs) in the body frame.
        morphological_features: The sensed surface frame (SM outputs) or the detected object
            rotation (LM outputs).
        non_morphological_features: Pose-independent features, e.g. `rgba`, `principal_curvatures`
            or the symbolic `object_id` of an LM output.
        confidence: Confidence in [0, 1].
        use_state: Whether receivers should use the message. Unused messages are still delivered.
        sender_id: Unique identifier of the sender.
        sender_type: Whether the sender is a sensor module or a learning module.
    """

    location: tuple[float, float, float]
    morphological_features: SurfaceFrame | Rotation
    non_morphological_features: dict[str, FeatureValue] = field(default_factory=dict)
    confidence: float = 1.0
    use_state: bool = True
    sender_id: str
    sender_type: SenderType

    @property
    def position(self) -> npt.NDArray[np.float64]:
        return np.array(self.location, dtype=np.float64)

    def feature(self, name: str) -> npt.NDArray[np.float64] | None:
        value = self.non_morphological_features.get(name)
        if value is None or isinstance(value, str):
            return None
        return np.array(value, dtype=np.float64)


@dataclass(frozen=True, kw_only=True)
class GoalState(StateMessage):
    """A target pose (plus desired features) for the motor system."""


@dataclass(frozen=True)
class Vote:
    object_id: str
    location: tuple[float, float, float]
    rotation: Rotation
    evidence: float


@dataclass(frozen=True, kw_only=True)
class VotePacket:
    sender_id: str
    sender_sensed_location: tuple[float, float, float]
    votes: tuple[Vote, ...] = ()


Message = Union[StateMessage, GoalState, VotePacket]


def _finite(values: tuple[float, ...]) -> bool:
    return all(math.isfinite(v) for v in values)


def _rotation_violations(rotation: Rotation) -> list[str]:
    matrix = rotation.matrix
    if not np.all(np.isfinite(matrix)):
        return ["frame not orthonormal"]
    if np.max(np.abs(matrix @ matrix.T - np.eye(3))) > FRAME_TOLERANCE:
        return ["frame not orthonormal"]
    if abs(np.linalg.det(matrix) - 1.0) > FRAME_TOLERANCE:
        return ["rotation determinant is not +1"]
    return []


def validate(msg: Message) -> list[str]:
    """Return every invariant violation of a message; an empty list means the message is valid."""
    violations: list[str] = []
    if isinstance(msg, VotePacket):
        if not msg.sender_id:
            violations.append("sender_id empty")
        if len(msg.sender_sensed_location) != 3 or not _finite(msg.sender_sensed_location):
            violations.append("location not finite")
        for vote in msg.votes:
            if not (-1.0 <= vote.evidence <= 1.0):
                violations.append(f"vote evidence out of range for {vote.object_id}")
            if len(vote.location) != 3 or not _finite(vote.location):
                violations.append(f"vote location not finite for {vote.object_id}")
            violations.extend(_rotation_violations(vote.rotation))
        return violations

    if len(msg.location) != 3 or not _finite(msg.location):
        violations.append("location not finite")
    if not (math.isfinite(msg.confidence) and 0.0 <= msg.confidence <= 1.0):
        violations.append("confidence out of range")
    morph = msg.morphological_features
    if isinstance(morph, SurfaceFrame):
        if not morph.is_orthonormal():
            violations.append("frame not orthonormal")
    elif isinstance(morph, Rotation):
        violations.extend(_rotation_violations(morph))
    else:
        violations.append("unknown morphological feature type")
    for name, value in msg.non_morphological_features.items():
        if not isinstance(value, str) and not _finite(tuple(value)):
            violations.append(f"feature {name} not finite")
    if not msg.sender_id:
        violations.append("sender_id empty")
    if not isinstance(msg.sender_type, SenderType):
        violations.append("unknown sender_type")
    return violations


def _encode_rotation(rotation: Rotation) -> dict[str, Any]:
    return {"kind": "rotation", "matrix": rotation.matrix.tolist(), "quat": list(rotation.quat)}


def _encode_morph(morph: SurfaceFrame | Rotation) -> dict[str, Any]:
    if isinstance(morph, Rotation):
        return _encode_rotation(morph)
    return {
        "kind": "surface_frame",
        "vectors": [list(morph.point_normal), list(morph.curvature_dir_1), list(morph.curvature_dir_2)],
    }


def to_dict(msg: Message) -> dict[str, Any]:
    if isinstance(msg, VotePacket):
        return {
            "kind": "vote",
            "sender_id": msg.sender_id,
            "location": list(msg.sender_sensed_location),
            "votes": [
                {
                    "object_id": vote.object_id,
                    "location": list(vote.location),
                    "rotation": _encode_rotation(vote.rotation),
                    "evidence": float(vote.evidence),
                }
                for vote in msg.votes
            ],
        }
    return {
        "kind": "goal" if isinstance(msg, GoalState) else "state",
        "location": list(msg.location),
        "morph": _encode_morph(msg.morphological_features),
        "features": {
            name: value if isinstance(value, str) else list(value)
            for name, value in msg.non_morphological_features.items()
        },
        "confidence": float(msg.confidence),
        "use_state": bool(msg.use_state),
        "sender_id": msg.sender_id,
        "sender_type": msg.sender_type.value,
    }


def encode(msg: Message) -> bytes:
    """Encode a message as one line of JSON. Floats are written with `repr`, so decoding is bit-exact."""
    return json.dumps(to_dict(msg), separators=(",", ":")).encode("utf-8")


def _decode_rotation(data: dict[str, Any]) -> Rotation:
    if data.get("kind") != "rotation":
        raise KeyError("rotation")
    return Rotation(tuple(float(v) for v in data["quat"]))


def _decode_morph(data: dict[str, Any]) -> SurfaceFrame | Rotation:
    if data["kind"] == "surface_frame":
        return SurfaceFrame.from_matrix(data["vectors"])
    return _decode_rotation(data)


def _decode_location(values: list[float]) -> tuple[float, float, float]:
    location = tuple(float(v) for v in values)
    if len(location) != 3:
        raise ValueError("location must have 3 components")
    return location


def from_dict(data: dict[str, Any]) -> Message:
    kind = data["kind"]
    if kind == "vote":
        return VotePacket(
            sender_id=str(data["sender_id"]),
            sender_sensed_location=_decode_location(data["location"]),
            votes=tuple(
                Vote(
                    object_id=str(vote["object_id"]),
                    location=_decode_location(vote["location"]),
                    rotation=_decode_rotation(vote["rotation"]),
                    evidence=float(vote["evidence"]),
                )
                for vote in data["votes"]
            ),
        )
    if kind not in ("state", "goal"):
        raise ValueError(f"unknown message kind {kind!r}")
    message_type = GoalState if kind == "goal" else StateMessage
    return message_type(
        location=_decode_location(data["location"]),
        morphological_features=_decode_morph(data["morph"]),
        non_morphological_features={
            name: value if isinstance(value, str) else as_tuple(value)
            for name, value in data["features"].items()
        },
        confidence=float(data["confidence"]),
        use_state=bool(data["use_state"]),
        sender_id=str(data["sender_id"]),
        sender_type=SenderType(data["sender_type"]),
    )


def decode(payload: bytes) -> Message:
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CodecError(f"Invalid UTF-8: {e.reason}", offset=e.start) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise CodecError(f"Malformed message: {e.msg}", offset=len(text[: e.pos].encode("utf-8"))) from e
    if not isinstance(data, dict):
        raise CodecError("Message is not a JSON object", offset=0)
    try:
        return from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise CodecError(f"Invalid message structure: {e!r}", offset=0) from e


def log_message(msg: Message) -> None:
    """Write a message to the CMP traffic log (one JSON object per line) if it is enabled."""
    if traffic_logger.isEnabledFor(logging.INFO):
        traffic_logger.info(encode(msg).decode("utf-8"))
