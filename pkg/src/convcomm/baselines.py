"""Unsupervised baselines: tf-idf and word-vector-centroid utterance
embeddings with context averaging, fed to the same clustering and
evaluation stack as the neural pipeline.

Both baselines produce d_f-dimensional vectors (32 by default) so their
scores are directly comparable: text representation -> PCA to 21 dims
-> concatenate the 21-dim discourse block -> PCA to d_f -> average with
the context window. The tf-idf vocabulary and both of its PCA stages
are per-meeting (the vocabulary is conversation-local); the word-vector
baseline reuses the corpus-level token projection for its first stage
and compresses per meeting for the second.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import FeaturePipeline, Meeting
from .errors import ConfigurationError


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "tfidf"  # "tfidf" | "w2v"
    c_pre: int = 11
    c_post: int = 11
    d_f: int = 32
    text_dim: int = 21

    def __post_init__(self):
        if self.kind not in ("tfidf", "w2v"):
            raise ConfigurationError(f"unknown baseline kind {self.kind!r}")
        if self.c_pre < 0 or self.c_post < 0 or self.d_f < 1:
            raise ConfigurationError("invalid baseline window or dimension")


def _pca_compress(X: np.ndarray, out_dim: int, label: str) -> np.ndarray:
    """Project onto principal axes; zero-pad when the data cannot fill
    ``out_dim`` components (degenerate vocabulary or tiny meetings)."""
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    tol = max(Xc.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    rank = int((s > tol).sum())
    take = min(out_dim, rank)
    if take < out_dim:
        warnings.warn(
            f"{label}: rank {rank} below {out_dim} dims; padding with zeros"
        )
    out = np.zeros((X.shape[0], out_dim))
    if take:
        comps = Vt[:take]
        for row in comps:
            j = int(np.argmax(np.abs(row)))
            if row[j] < 0:
                row *= -1.0
        out[:, :take] = Xc @ comps.T
    return out


def _context_average(X: np.ndarray, c_pre: int, c_post: int) -> np.ndarray:
    """Mean of each row with its clipped window of neighbors."""
    if c_pre == 0 and c_post == 0:
        return X.copy()
    T = X.shape[0]
    out = np.empty_like(X)
    for t in range(T):
        lo = max(0, t - c_pre)
        hi = min(T - 1, t + c_post)
        out[t] = X[lo : hi + 1].mean(axis=0)
    return out


def _discourse_matrix(features: FeaturePipeline, meeting: Meeting) -> np.ndarray:
    return np.stack([features.discourse(meeting, t) for t in range(len(meeting))])


def _tfidf_matrix(meeting: Meeting) -> np.ndarray:
    """Utterances as documents over the meeting's own vocabulary; raw term
    counts weighted by ln(T / document frequency)."""
    vocab = sorted({tok for u in meeting.utterances for tok in u.tokens})
    index = {tok: i for i, tok in enumerate(vocab)}
    T = len(meeting)
    counts = np.zeros((T, len(vocab)))
    for t, u in enumerate(meeting.utterances):
        for tok in u.tokens:
            counts[t, index[tok]] += 1.0
    df = (counts > 0).sum(axis=0)
    idf = np.log(T / df)
    return counts * idf


def tfidf_embed(meeting: Meeting, features: FeaturePipeline,
                cfg: BaselineConfig) -> np.ndarray:
    """(T, d_f) baseline vectors for all utterances of one meeting."""
    text = _pca_compress(
        _tfidf_matrix(meeting), cfg.text_dim,
        f"{meeting.meeting_id}: tf-idf vocabulary"
    )
    joined = np.concatenate([text, _discourse_matrix(features, meeting)], axis=1)
    compressed = _pca_compress(joined, cfg.d_f,
                               f"{meeting.meeting_id}: tf-idf features")
    return _context_average(compressed, cfg.c_pre, cfg.c_post)


def w2v_embed(meeting: Meeting, features: FeaturePipeline,
              cfg: BaselineConfig) -> np.ndarray:
    """(T, d_f) vectors from mean projected word vectors per utterance.

    The per-token 21-dim projection is the corpus-level one (PCA of the
    pretrained vectors; cached random vectors for OOV tokens), so the
    utterance mean equals projecting the mean of the raw vectors.
    """
    text = np.stack([
        np.mean([features.token_text(tok) for tok in u.tokens], axis=0)
        for u in meeting.utterances
    ])
    joined = np.concatenate([text, _discourse_matrix(features, meeting)], axis=1)
    compressed = _pca_compress(joined, cfg.d_f,
                               f"{meeting.meeting_id}: w2v features")
    return _context_average(compressed, cfg.c_pre, cfg.c_post)


def baseline_embed_fn(features: FeaturePipeline, cfg: BaselineConfig):
    """An ``embed_fn(meeting) -> (ids, matrix)`` over summary-worthy
    utterances, for evaluate_pipeline."""
    embed = tfidf_embed if cfg.kind == "tfidf" else w2v_embed

    def fn(meeting: Meeting):
        full = embed(meeting, features, cfg)
        ids = [u.index for u in meeting.utterances if u.summary_worthy]
        return ids, full[ids]

    return fn
