"""Fuzzy c-means over learned embeddings, with multi-restart and
threshold-based overlapping assignment.

The objective is the fuzzified within-group sum of squared distances

    J(M, Q) = sum_q sum_t m_qt^fuz * dist(u_t, c_q)^2

with the alternating updates: centroids as m^fuz-weighted means, then
memberships m_qt proportional to dist_qt^(-2/(fuz-1)). The distance is
Euclidean in triplet mode and Manhattan in siamese mode; the Manhattan
variant swaps only the distance kernel and keeps the weighted-mean
centroid estimator (a deliberate fidelity-over-optimality choice).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ClusteringError

# Euclidean alternating updates are exact coordinate minimizers, so J is
# provably nonincreasing (slack covers floating-point noise only) and any
# increase is asserted. The Manhattan variant keeps the weighted-mean
# centroid, which is not the l1-optimal estimator: J can genuinely tick up
# near the fixed point, so no assertion there; the signed stopping rule
# (stop once J decreases by less than tol) terminates either way.
_J_SLACK = 1e-9


@dataclass(frozen=True)
class FcmConfig:
    n_communities: int | str = 11  # an int, or "v" for the ground-truth count
    fuzziness: float = 2.0
    threshold: float = 0.2
    restarts: int = 20
    max_iters: int = 300
    tol: float = 1e-6
    distance: str = "euclidean"

    def __post_init__(self):
        if self.fuzziness <= 1.0:
            raise ClusteringError("fuzziness must be > 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ClusteringError("threshold must be in [0, 1]")
        if isinstance(self.n_communities, str):
            if self.n_communities != "v":
                raise ClusteringError(
                    f"n_communities must be an int or 'v', got {self.n_communities!r}"
                )
        elif self.n_communities < 1:
            raise ClusteringError("n_communities must be >= 1")
        if self.restarts < 1 or self.max_iters < 1 or self.tol < 0:
            raise ClusteringError("restarts, max_iters must be >= 1 and tol >= 0")
        if self.distance not in ("euclidean", "manhattan"):
            raise ClusteringError(f"unknown distance {self.distance!r}")


@dataclass
class Membership:
    """FCM output: per-utterance community probabilities (rows sum to 1),
    the centroids, the final objective value, and the iteration count."""

    matrix: np.ndarray
    centroids: np.ndarray
    objective: float
    n_iters: int


def _distances(X: np.ndarray, C: np.ndarray, distance: str) -> np.ndarray:
    diff = X[:, None, :] - C[None, :, :]
    if distance == "euclidean":
        return np.sqrt((diff * diff).sum(axis=2))
    return np.abs(diff).sum(axis=2)


def _update_memberships(D: np.ndarray, fuz: float) -> np.ndarray:
    """m_qt = (sum_j (d_tq / d_tj)^(2/(fuz-1)))^-1, in log space for
    stability at extreme fuzziness; coincident points get a hard 1 on the
    first zero-distance centroid (the formula's limit)."""
    p = 2.0 / (fuz - 1.0)
    M = np.zeros_like(D)
    zero_rows = (D <= 0.0).any(axis=1)
    if zero_rows.any():
        first_zero = np.argmax(D[zero_rows] <= 0.0, axis=1)
        M[np.flatnonzero(zero_rows), first_zero] = 1.0
    live = ~zero_rows
    if live.any():
        logits = -p * np.log(D[live])
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        M[live] = e / e.sum(axis=1, keepdims=True)
    return M


def fcm(X: np.ndarray, cfg: FcmConfig, rng: np.random.Generator,
        init_membership: np.ndarray | None = None) -> Membership:
    """One FCM run from a Dirichlet(1) membership initialization (or an
    explicit one, for reproducibility tests)."""
    X = np.asarray(X, dtype=np.float64)
    Q = cfg.n_communities
    if not isinstance(Q, int):
        raise ClusteringError("n_communities 'v' must be resolved before fcm()")
    T = X.shape[0]
    if T < Q:
        raise ClusteringError(
            f"need at least {Q} points to form {Q} communities, got {T}"
        )
    if init_membership is not None:
        M = np.asarray(init_membership, dtype=np.float64).copy()
        if M.shape != (T, Q):
            raise ClusteringError(
                f"init membership shape {M.shape} != {(T, Q)}"
            )
    else:
        M = rng.dirichlet(np.ones(Q), size=T)

    fuz = cfg.fuzziness
    centroids = np.zeros((Q, X.shape[1]))
    J_prev = np.inf
    J = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        W = M**fuz
        weights = W.sum(axis=0)
        live = weights > 0.0
        if live.any():
            centroids[live] = (W.T[live] @ X) / weights[live, None]
        # clusters with zero total weight keep their previous centroid
        D = _distances(X, centroids, cfg.distance)
        M = _update_memberships(D, fuz)
        J = float(((M**fuz) * D * D).sum())
        if (
            cfg.distance == "euclidean"
            and J > J_prev + _J_SLACK * max(1.0, abs(J_prev))
        ):
            raise ClusteringError(
                f"objective increased at iteration {it}: {J_prev} -> {J}"
            )
        if cfg.tol > 0 and J_prev - J < cfg.tol:
            break
        J_prev = J
    return Membership(M, centroids.copy(), J, it)


def fcm_best_of(X: np.ndarray, cfg: FcmConfig, base_seed: int) -> Membership:
    """cfg.restarts independent runs; returns the smallest-objective one."""
    best: Membership | None = None
    for r in range(cfg.restarts):
        rng = np.random.default_rng(
            np.random.SeedSequence([base_seed & 0xFFFFFFFF, 0xFC, r])
        )
        result = fcm(X, cfg, rng)
        if best is None or result.objective < best.objective:
            best = result
    return best


def assign_communities(membership: Membership, threshold: float
                       ) -> tuple[list[list[int]], bool]:
    """Threshold the membership matrix into overlapping communities.

    An utterance joins every community whose membership is >= threshold
    (multi-assignment allowed); empty communities are dropped; all
    utterances left unassigned are merged into one extra community.
    Returns (communities, has_unassigned_bucket).
    """
    M = membership.matrix
    communities = []
    assigned = np.zeros(M.shape[0], dtype=bool)
    for q in range(M.shape[1]):
        members = np.flatnonzero(M[:, q] >= threshold)
        if members.size:
            communities.append(members.tolist())
            assigned[members] = True
    leftover = np.flatnonzero(~assigned)
    if leftover.size:
        communities.append(leftover.tolist())
    return communities, bool(leftover.size)


def resolve_q(cfg: FcmConfig, ground_truth_count: int) -> FcmConfig:
    """Concretize n_communities='v' to the merged ground-truth count."""
    if cfg.n_communities == "v":
        return replace(cfg, n_communities=max(1, ground_truth_count))
    return cfg
