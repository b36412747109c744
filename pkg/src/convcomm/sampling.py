"""Genuine/impostor pairs and (positive, anchor, negative) triplets.

Pools are meeting-local: utterances sharing at least one ground-truth
community form genuine pairs, utterances sharing none form impostor
pairs, and triplet negatives are community members sharing no community
with the anchor. Sampling is uniform with replacement over the merged
per-meeting pools, so the requested counts are always exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .corpus import Meeting
from .errors import SamplingError


@dataclass(frozen=True)
class UttRef:
    meeting_id: str
    index: int


@dataclass(frozen=True)
class PairExample:
    x: UttRef
    y: UttRef
    label: int  # 0 genuine, 1 impostor


@dataclass(frozen=True)
class TripletExample:
    positive: UttRef
    anchor: UttRef
    negative: UttRef


@dataclass
class _MeetingPools:
    meeting_id: str
    genuine: list[tuple[int, int]]
    impostor: list[tuple[int, int]]
    anchor_pairs: list[tuple[int, int]]  # (positive, anchor), ordered
    negatives: dict[int, list[int]]


def _meeting_pools(meeting: Meeting) -> _MeetingPools:
    membership: dict[int, set[int]] = {}
    for ci, c in enumerate(meeting.communities):
        for u in c.members:
            membership.setdefault(u, set()).add(ci)
    universe = sorted(membership)

    genuine = []
    impostor = []
    for a, b in combinations(universe, 2):
        if membership[a] & membership[b]:
            genuine.append((a, b))
        else:
            impostor.append((a, b))

    negatives = {
        a: [u for u in universe if not membership[u] & membership[a]]
        for a in universe
    }
    anchor_pairs = []
    for a, b in genuine:
        if negatives[b]:
            anchor_pairs.append((a, b))
        if negatives[a]:
            anchor_pairs.append((b, a))
    return _MeetingPools(meeting.meeting_id, genuine, impostor,
                         anchor_pairs, negatives)


def _all_pools(meetings) -> list[_MeetingPools]:
    return [_meeting_pools(m) for m in meetings]


def sample_pairs(meetings, n_genuine: int, n_impostor: int,
                 rng: np.random.Generator) -> list[PairExample]:
    """Exactly ``n_genuine`` + ``n_impostor`` pairs, uniform with
    replacement over the per-meeting pair pools."""
    pools = _all_pools(meetings)
    genuine = [(p.meeting_id, pair) for p in pools for pair in p.genuine]
    impostor = [(p.meeting_id, pair) for p in pools for pair in p.impostor]
    if n_genuine > 0 and not genuine:
        raise SamplingError("no eligible genuine pair in the corpus")
    if n_impostor > 0 and not impostor:
        raise SamplingError("no eligible impostor pair in the corpus")

    out: list[PairExample] = []
    for pool, label, n in ((genuine, 0, n_genuine), (impostor, 1, n_impostor)):
        if n == 0:
            continue
        for i in rng.integers(len(pool), size=n):
            mid, (a, b) = pool[i]
            out.append(PairExample(UttRef(mid, a), UttRef(mid, b), label))
    return out


def sample_triplets(meetings, n: int, rng: np.random.Generator
                    ) -> list[TripletExample]:
    """Exactly ``n`` triplets: (positive, anchor) uniform over ordered
    within-community pairs whose anchor has at least one negative, then
    the negative uniform over that anchor's eligible utterances."""
    pools = _all_pools(meetings)
    pairs = [(p, pa) for p in pools for pa in p.anchor_pairs]
    if n > 0 and not pairs:
        raise SamplingError("no valid triplet in the corpus")
    out: list[TripletExample] = []
    for i in rng.integers(len(pairs), size=n) if n else []:
        pool, (pos, anchor) = pairs[i]
        negs = pool.negatives[anchor]
        neg = negs[rng.integers(len(negs))]
        out.append(
            TripletExample(
                UttRef(pool.meeting_id, pos),
                UttRef(pool.meeting_id, anchor),
                UttRef(pool.meeting_id, neg),
            )
        )
    return out


def _epoch_rng(base_seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(
            [base_seed & 0xFFFFFFFF, epoch & 0xFFFFFFFF, 0x5A3C9D17]
        )
    )


def epoch_resample(meetings, meta: str, n: int, base_seed: int,
                   epoch: int) -> list:
    """Fresh example set for one epoch, deterministic per (seed, epoch).

    Triplet mode yields ``n`` triplets; siamese mode yields ``n``
    genuine plus ``n`` impostor pairs, shuffled.
    """
    rng = _epoch_rng(base_seed, epoch)
    if meta == "triplet":
        return sample_triplets(meetings, n, rng)
    pairs = sample_pairs(meetings, n, n, rng)
    order = rng.permutation(len(pairs))
    return [pairs[i] for i in order]


def pool_stats(meetings) -> dict:
    """Per-meeting pool sizes for auditing (sample-stats subcommand)."""
    stats = {}
    for pool in _all_pools(meetings):
        stats[pool.meeting_id] = {
            "community_utterances": len(pool.negatives),
            "genuine_pairs": len(pool.genuine),
            "impostor_pairs": len(pool.impostor),
            "triplets": sum(
                len(pool.negatives[a]) for _, a in pool.anchor_pairs
            ),
        }
    return stats
