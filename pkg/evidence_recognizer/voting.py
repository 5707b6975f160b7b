from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

import numpy as np
from sklearn.neighbors import KDTree

from evidence_recognizer.cmp import Vote, VotePacket
from evidence_recognizer.exceptions import ConfigError
from evidence_recognizer.geometry import Rotation, as_tuple, as_vec3, rotation_distance
from evidence_recognizer.learning_module.config import VoteConfig

if TYPE_CHECKING:
    from collections.abc import Sequence

    from evidence_recognizer.geometry import ArrayLike
    from evidence_recognizer.learning_module.hypotheses import HypothesisSpace

logger = logging.getLogger(__name__)

__all__ = ["VoteConfig", "emit_vote", "integrate_votes", "transform_votes"]


def emit_vote(
    space: HypothesisSpace, sensed_location: ArrayLike, top_fraction: float = 0.2, sender_id: str = "lm"
) -> VotePacket:
    """Scale all evidence to [-1, 1] (min to -1, max to 1) and send the top fraction of hypotheses.

    Only poses and scaled evidence leave the module, never sensed features.
    """
    if not 0 < top_fraction <= 1:
        raise ConfigError("Valid top_fraction value is in (0, 1]")
    object_ids = [object_id for object_id, h in space.objects.items() if len(h)]
    if not object_ids:
        return VotePacket(sender_id=sender_id, sender_sensed_location=as_tuple(sensed_location))
    evidence = np.concatenate([space.objects[object_id].evidence for object_id in object_ids])
    owners = np.concatenate(
        [np.full(len(space.objects[object_id]), i) for i, object_id in enumerate(object_ids)]
    )
    local = np.concatenate([np.arange(len(space.objects[object_id])) for object_id in object_ids])
    low, high = float(evidence.min()), float(evidence.max())
    if high > low:
        scaled = np.clip(2.0 * (evidence - low) / (high - low) - 1.0, -1.0, 1.0)
    else:
        scaled = np.zeros_like(evidence)
    count = max(1, math.ceil(top_fraction * len(evidence)))
    # stable sort keeps the first argmax in front
    order = np.argsort(-evidence, kind="stable")[:count]
    votes = []
    for flat in order:
        h = space.objects[object_ids[owners[flat]]]
        index = local[flat]
        votes.append(
            Vote(
                object_id=object_ids[owners[flat]],
                location=as_tuple(h.locations[index]),
                rotation=Rotation.from_matrix(h.rotations[index]),
                evidence=float(scaled[flat]),
            )
        )
    return VotePacket(
        sender_id=sender_id, sender_sensed_location=as_tuple(sensed_location), votes=tuple(votes)
    )


def transform_votes(packet: VotePacket, receiver_sensed_location: ArrayLike) -> tuple[Vote, ...]:
    """Shift every vote by the sensor displacement between sender and receiver, in the vote's model frame."""
    delta = as_vec3(receiver_sensed_location) - as_vec3(packet.sender_sensed_location)
    if not np.any(delta):
        return packet.votes
    return tuple(
        Vote(
            object_id=vote.object_id,
            location=as_tuple(as_vec3(vote.location) + vote.rotation.matrix.T @ delta),
            rotation=vote.rotation,
            evidence=vote.evidence,
        )
        for vote in packet.votes
    )


def integrate_votes(space: HypothesisSpace, votes: Sequence[Vote], config: VoteConfig) -> HypothesisSpace:
    """Add to every hypothesis the distance-weighted average of compatible votes; no votes add nothing."""
    updated = space.copy()
    by_object: dict[str, list[Vote]] = {}
    for vote in votes:
        by_object.setdefault(vote.object_id, []).append(vote)
    for object_id, object_votes in by_object.items():
        h = updated.objects.get(object_id)
        if h is None or not len(h):
            continue
        locations = np.array([vote.location for vote in object_votes])
        rotations = np.stack([vote.rotation.matrix for vote in object_votes])
        values = np.array([vote.evidence for vote in object_votes])
        neighbors, distances = KDTree(locations).query_radius(
            h.locations, r=config.radius, return_distance=True
        )
        counts = np.array([len(n) for n in neighbors])
        if not counts.sum():
            continue
        hyp_index = np.repeat(np.arange(len(h)), counts)
        vote_index = np.concatenate(neighbors).astype(np.intp)
        weights = 1.0 - np.concatenate(distances) / config.radius
        compatible = rotation_distance(h.rotations[hyp_index], rotations[vote_index]) <= config.max_rotation
        weights = np.where(compatible, np.clip(weights, 0.0, 1.0), 0.0)
        weight_sum = np.bincount(hyp_index, weights=weights, minlength=len(h))
        weighted = np.bincount(hyp_index, weights=weights * values[vote_index], minlength=len(h))
        safe = np.where(weight_sum > 0, weight_sum, 1.0)
        h.evidence = h.evidence + np.where(weight_sum > 0, weighted / safe, 0.0)
        logger.debug(f"{object_id}: {int((weight_sum > 0).sum())} hypotheses supported by votes")
    return updated
