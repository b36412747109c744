"""Shared fixtures: tiny hand-built meetings and word-vector tables."""
import json

import numpy as np
import pytest

from convcomm.corpus import (
    Community,
    FeaturePipeline,
    Meeting,
    Utterance,
    WordVectors,
    fit_pca,
)

ROLES = ("PM", "ME", "UI", "ID")
DAS = ("inf", "sug", "ass", "bck")


def make_meeting(meeting_id, token_lists, communities, partition="train",
                 worthy=None, roles=None, das=None):
    """Build a Meeting from plain lists; all utterances summary-worthy by
    default unless ``worthy`` narrows it down."""
    T = len(token_lists)
    if worthy is None:
        worthy = set(range(T))
    utts = tuple(
        Utterance(
            index=t,
            tokens=tuple(tokens),
            speaker_role=(roles[t] if roles else ROLES[t % 4]),
            dialogue_act=(das[t] if das else DAS[t % 4]),
            summary_worthy=t in worthy,
        )
        for t, tokens in enumerate(token_lists)
    )
    comms = tuple(
        Community(id=f"{meeting_id}.c{i}", section="abstract",
                  members=frozenset(members))
        for i, members in enumerate(communities)
    )
    return Meeting(meeting_id, partition, utts, comms)


def make_word_vectors(tokens, dim=30, seed=0):
    rng = np.random.default_rng(seed)
    return WordVectors({t: rng.normal(size=dim) for t in tokens}, dim)


def make_pipeline(meetings, dim=30, seed=0, text_dim=None):
    """Feature pipeline over every token appearing in ``meetings``."""
    from convcomm.corpus import TEXT_DIM

    vocab = sorted({tok for m in meetings for u in m.utterances for tok in u.tokens})
    # enough extra vocabulary to make the PCA full-rank
    extra = [f"pad{i}" for i in range(max(0, 2 * dim - len(vocab)))]
    wv = make_word_vectors(vocab + extra, dim=dim, seed=seed)
    pca = fit_pca([wv.get(t) for t in vocab + extra],
                  out_dim=text_dim or TEXT_DIM)
    return FeaturePipeline(wv, pca, oov_seed=seed)


@pytest.fixture
def toy_meeting():
    """Six utterances, two size-3 communities plus a singleton; contexts
    small enough for whole-model gradient checks."""
    tokens = [
        ["alpha", "beta", "gamma"],
        ["beta", "delta"],
        ["alpha", "gamma", "delta", "beta"],
        ["epsilon", "zeta"],
        ["zeta", "eta", "epsilon"],
        ["eta", "epsilon"],
    ]
    return make_meeting(
        "toy", tokens, communities=[{0, 1, 2}, {3, 4, 5}, {1}]
    )


@pytest.fixture
def toy_pipeline(toy_meeting):
    return make_pipeline([toy_meeting])


def write_corpus_file(path, meetings):
    docs = []
    for m in meetings:
        docs.append(
            {
                "meeting_id": m.meeting_id,
                "partition": m.partition,
                "utterances": [
                    {
                        "index": u.index,
                        "role": u.speaker_role,
                        "dialogue_act": u.dialogue_act,
                        "tokens": list(u.tokens),
                        "summary_worthy": u.summary_worthy,
                    }
                    for u in m.utterances
                ],
                "communities": [
                    {"id": c.id, "section": c.section, "members": sorted(c.members)}
                    for c in m.communities
                ],
            }
        )
    path.write_text(json.dumps(docs, indent=1), encoding="utf-8")
    return path
