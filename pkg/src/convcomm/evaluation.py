"""Distance-level ranking metrics and the clustering-level Omega index.

Ranking: for each query utterance and each of its non-singleton
ground-truth communities, the other members are the relevant set;
precision/recall/F1 over the top-k nearest neighbors are averaged first
at the community level, then at the meeting level, then across
meetings. k may be a fixed integer or "v" (community size minus one, in
which case P = R = F1).

Omega: chance-corrected agreement between two overlapping clusterings
based on exact pairwise co-membership multiplicities.
"""
from __future__ import annotations

import hashlib
import warnings
from collections import Counter
from dataclasses import asdict, replace
from itertools import combinations

import numpy as np

from .clustering import FcmConfig, assign_communities, fcm_best_of
from .corpus import Meeting, merge_nested
from .errors import EvaluationError


# ---------------------------------------------------------------------------
# neighbor ranking


def _distances_to(emb: np.ndarray, query: int, distance: str) -> np.ndarray:
    diff = emb - emb[query]
    if distance == "euclidean":
        return np.sqrt((diff * diff).sum(axis=1))
    if distance == "manhattan":
        return np.abs(diff).sum(axis=1)
    raise EvaluationError(f"unknown distance {distance!r}")


def rank_neighbors(emb: np.ndarray, query: int, distance: str) -> list[int]:
    """All non-query rows by ascending distance; ties break by index."""
    emb = np.asarray(emb, dtype=np.float64)
    if emb.shape[0] < 2:
        raise EvaluationError("ranking needs at least two utterances")
    d = _distances_to(emb, query, distance)
    order = sorted(i for i in range(emb.shape[0]) if i != query)
    return sorted(order, key=lambda i: (d[i], i))


# ---------------------------------------------------------------------------
# ranking metrics


def _prf(hits: int, k: int, n_relevant: int) -> tuple[float, float, float]:
    p = hits / k
    r = hits / n_relevant
    f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return p, r, f1


def ranking_metrics_meeting(emb: np.ndarray, embedded_ids, communities,
                            k, distance: str) -> dict | None:
    """Community-then-meeting averaged P/R/F1@k for one meeting.

    ``communities`` are the meeting's raw ground-truth communities;
    singletons are excluded. Returns None (with a warning) when no
    non-singleton community exists. ``k`` is an int or "v".
    """
    pos = {u: i for i, u in enumerate(embedded_ids)}
    eligible = [c for c in communities if len(c.members) >= 2]
    if not eligible:
        warnings.warn("meeting skipped: no non-singleton community")
        return None
    n_candidates = len(embedded_ids) - 1
    per_community = []
    for c in eligible:
        scores = []
        for query in sorted(c.members):
            relevant = {pos[v] for v in c.members if v != query}
            ranking = rank_neighbors(emb, pos[query], distance)
            if k == "v":
                kk = len(relevant)
            else:
                kk = int(k)
                if kk > n_candidates:
                    warnings.warn(
                        f"k={kk} clipped to {n_candidates} candidates"
                    )
                    kk = n_candidates
            hits = sum(1 for i in ranking[:kk] if i in relevant)
            scores.append(_prf(hits, kk, len(relevant)))
        per_community.append(tuple(np.mean(scores, axis=0)))
    p, r, f1 = np.mean(per_community, axis=0)
    return {"precision": float(p), "recall": float(r), "f1": float(f1)}


# ---------------------------------------------------------------------------
# omega index


def _pair_multiplicities(solution, n: int) -> Counter:
    mult: Counter = Counter()
    for community in solution:
        members = sorted(set(community))
        if members and (members[0] < 0 or members[-1] >= n):
            raise EvaluationError(
                f"community member outside 0..{n - 1}: {members}"
            )
        for a, b in combinations(members, 2):
            mult[(a, b)] += 1
    return mult


def omega_components(s1, s2, n: int) -> tuple[float, float, float]:
    """(observed, expected, omega) agreement between two clusterings of
    the same n objects."""
    if n < 2:
        return 1.0, 1.0, 1.0
    m1 = _pair_multiplicities(s1, n)
    m2 = _pair_multiplicities(s2, n)
    n_total = n * (n - 1) // 2
    agree = 0
    count1: Counter = Counter()
    count2: Counter = Counter()
    for pair in combinations(range(n), 2):
        j1 = m1.get(pair, 0)
        j2 = m2.get(pair, 0)
        if j1 == j2:
            agree += 1
        count1[j1] += 1
        count2[j2] += 1
    observed = agree / n_total
    j_max = min(max(count1), max(count2))
    expected = sum(
        count1[j] * count2[j] for j in range(j_max + 1)
    ) / (n_total * n_total)
    if expected == 1.0:
        if observed == 1.0:
            return observed, expected, 1.0
        raise EvaluationError("undefined omega: expected agreement is 1")
    omega = (observed - expected) / (1.0 - expected)
    return observed, expected, omega


def omega_index(s1, s2, n: int) -> float:
    """Chance-corrected pairwise co-membership agreement in (-inf, 1]."""
    return omega_components(s1, s2, n)[2]


# ---------------------------------------------------------------------------
# full pipeline evaluation


def _meeting_seed(base_seed: int, meeting_id: str) -> int:
    digest = hashlib.blake2b(meeting_id.encode("utf-8"), digest_size=4).digest()
    return (base_seed ^ int.from_bytes(digest, "little")) & 0xFFFFFFFF


def _metric_key(prefix: str, spec) -> str:
    return f"{prefix}_{spec}"


def evaluate_pipeline(meetings, embed_fn, distance: str,
                      fcm_cfg: FcmConfig, ks=("v", 10), qs=("v", 11),
                      base_seed: int = 0) -> dict:
    """Embed, rank, cluster and score every meeting.

    ``embed_fn(meeting) -> (utterance_ids, matrix)`` supplies embeddings
    (neural checkpoint or baseline). Ranking and FCM both use
    ``distance``. Returns per-meeting and aggregate metrics for every
    requested k and |Q|.
    """
    per_meeting: dict[str, dict] = {}
    for meeting in meetings:
        ids, emb = embed_fn(meeting)
        if len(ids) == 0:
            warnings.warn(f"{meeting.meeting_id}: no summary-worthy utterances")
            continue
        row: dict[str, float] = {}
        merged = merge_nested(meeting.communities)
        pos = {u: i for i, u in enumerate(ids)}

        if len(ids) >= 2:
            for k in ks:
                scores = ranking_metrics_meeting(
                    emb, ids, meeting.communities, k, distance
                )
                if scores is None:
                    continue
                row[_metric_key("p_at", k)] = scores["precision"]
                if k != "v":
                    row[_metric_key("r_at", k)] = scores["recall"]
                    row[_metric_key("f1_at", k)] = scores["f1"]

        truth = [sorted(pos[u] for u in c.members) for c in merged]
        for q in qs:
            if q == "v":
                cfg = replace(fcm_cfg, n_communities=max(1, len(merged)))
            else:
                cfg = replace(fcm_cfg, n_communities=int(q))
            n_q = cfg.n_communities
            if n_q > len(ids):
                warnings.warn(
                    f"{meeting.meeting_id}: |Q|={n_q} clipped to {len(ids)}"
                )
                cfg = replace(cfg, n_communities=len(ids))
            cfg = replace(cfg, distance=distance)
            best = fcm_best_of(
                emb, cfg, _meeting_seed(base_seed, meeting.meeting_id)
            )
            predicted, _ = assign_communities(best, cfg.threshold)
            row[_metric_key("omega_q", q)] = omega_index(
                predicted, truth, len(ids)
            )
        per_meeting[meeting.meeting_id] = row

    keys = sorted({k for row in per_meeting.values() for k in row})
    aggregate = {
        k: float(np.mean([row[k] for row in per_meeting.values() if k in row]))
        for k in keys
        if any(k in row for row in per_meeting.values())
    }
    return {
        "per_meeting": per_meeting,
        "aggregate": aggregate,
        "n_meetings": len(per_meeting),
        "distance": distance,
        "fcm": asdict(fcm_cfg),
        "ks": [str(k) for k in ks],
        "qs": [str(q) for q in qs],
    }


def format_table(report: dict) -> str:
    """Aggregate metrics as a x100, two-decimal text table."""
    agg = report["aggregate"]
    lines = ["metric                 score(x100)", "-" * 35]
    for key in sorted(agg):
        lines.append(f"{key:<22} {100.0 * agg[key]:>10.2f}")
    return "\n".join(lines)
