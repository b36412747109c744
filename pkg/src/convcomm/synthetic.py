"""Synthetic planted-community corpus for tests and demos.

Each meeting is a sequence of four topical segments of random length.
The first three segments carry one non-singleton community each (their
summary-worthy utterances), the fourth a singleton; the first two
communities share two boundary utterances, so every meeting has two
overlapping communities and one singleton. Utterances draw a mixture of
topic-specific and filler tokens, so community identity is only partly
readable from an utterance in isolation while the surrounding segment
is strongly informative: context windows genuinely help.

Word vectors place each topic's words around a separated centroid,
giving the embedding-based pipelines a signal that plain lexical
overlap does not provide (utterances are short and topic vocabularies
large, so same-community utterances often share no tokens at all).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    DIALOGUE_ACTS,
    SPEAKER_ROLES,
    Community,
    Meeting,
    Utterance,
    WordVectors,
)

_N_TOPICS = 4
_WORDS_PER_TOPIC = 24
_N_FILLER = 30
_VECTOR_DIM = 300


@dataclass(frozen=True)
class SyntheticConfig:
    n_meetings: int = 8
    n_validation: int = 1
    n_test: int = 1
    utterances_per_meeting: int = 40
    seed: int = 0
    topic_token_rate: float = 0.40
    min_tokens: int = 3
    max_tokens: int = 7
    worthy_rate: float = 0.75
    topic_sigma: float = 6.0
    word_noise: float = 0.8


def topic_words(q: int) -> list[str]:
    return [f"t{q}w{i:02d}" for i in range(_WORDS_PER_TOPIC)]


def filler_words() -> list[str]:
    return [f"fill{i:02d}" for i in range(_N_FILLER)]


def make_word_vectors(cfg: SyntheticConfig) -> WordVectors:
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed & 0xFFFFFFFF, 0x57])
    )
    table: dict[str, np.ndarray] = {}
    for q in range(_N_TOPICS):
        center = rng.normal(size=_VECTOR_DIM)
        center *= cfg.topic_sigma / np.linalg.norm(center)
        for w in topic_words(q):
            table[w] = center + rng.normal(scale=cfg.word_noise,
                                           size=_VECTOR_DIM)
    for w in filler_words():
        table[w] = rng.normal(scale=cfg.word_noise, size=_VECTOR_DIM)
    return WordVectors(table, _VECTOR_DIM)


def _draw_tokens(rng, topics, cfg: SyntheticConfig) -> tuple[str, ...]:
    n = int(rng.integers(cfg.min_tokens, cfg.max_tokens + 1))
    out = []
    filler = filler_words()
    for _ in range(n):
        if topics and rng.random() < cfg.topic_token_rate:
            q = topics[rng.integers(len(topics))]
            words = topic_words(q)
            out.append(words[rng.integers(len(words))])
        else:
            out.append(filler[rng.integers(len(filler))])
    return tuple(out)


def _segment_lengths(rng, total: int) -> list[int]:
    # four segments, each at least a quarter-ish of the floor, randomized
    # so absolute position does not map to a fixed topic across meetings
    base = total // 8
    lengths = [base] * 4
    for _ in range(total - 4 * base):
        lengths[int(rng.integers(4))] += 1
    return lengths


def make_meeting(index: int, partition: str, cfg: SyntheticConfig) -> Meeting:
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed & 0xFFFFFFFF, 0x4D, index])
    )
    T = cfg.utterances_per_meeting
    lengths = _segment_lengths(rng, T)
    bounds = np.cumsum([0] + lengths)

    segment_of = np.empty(T, dtype=int)
    for q in range(4):
        segment_of[bounds[q] : bounds[q + 1]] = q

    # worthy utterances per topical segment (at least two, so communities
    # are non-trivial and the first two can overlap), plus one singleton
    # past the midpoint of the last segment
    members: dict[int, set[int]] = {}
    for q in range(3):
        seg = list(range(bounds[q], bounds[q + 1]))
        k = int(np.clip(rng.binomial(len(seg), cfg.worthy_rate), 2, len(seg)))
        members[q] = set(rng.choice(seg, size=k, replace=False).tolist())
    last = list(range(bounds[3], T))
    singleton = int(last[len(last) // 2 + int(rng.integers(len(last) // 2))])

    worthy_of: dict[int, int] = {}
    for q, ts in members.items():
        for t in ts:
            worthy_of[t] = q
    worthy_of[singleton] = 3

    utterances = []
    das = list(DIALOGUE_ACTS)
    for t in range(T):
        q = int(segment_of[t])
        role = (
            SPEAKER_ROLES[q]
            if rng.random() < 0.65
            else SPEAKER_ROLES[rng.integers(4)]
        )
        if t in worthy_of:
            da = ("inf", "sug", "ass")[int(rng.integers(3))]
            topics = [worthy_of[t]]
        else:
            da = das[int(rng.integers(len(das)))]
            topics = []
        utterances.append(
            Utterance(t, _draw_tokens(rng, topics, cfg), role, da,
                      t in worthy_of)
        )

    # two boundary utterances belong to both of the first two communities
    overlap = sorted(members[0])[-2:]
    members[1].update(overlap)
    for t in overlap:
        u = utterances[t]
        mixed = _draw_tokens(rng, [0, 1], cfg)
        utterances[t] = Utterance(t, mixed, u.speaker_role, u.dialogue_act,
                                  True)

    mid = f"SYN{index:02d}"
    communities = [
        Community(f"{mid}.c{q}", ("abstract", "action", "problem")[q],
                  frozenset(members[q]))
        for q in range(3)
    ]
    communities.append(
        Community(f"{mid}.c3", "decision", frozenset({singleton}))
    )
    return Meeting(mid, partition, tuple(utterances), tuple(communities))


def generate_corpus(cfg: SyntheticConfig = SyntheticConfig()
                    ) -> tuple[list[Meeting], WordVectors]:
    """Meetings (all but the last two are training, then one validation,
    one test) plus their word-vector table."""
    meetings = []
    for i in range(cfg.n_meetings):
        if i < cfg.n_meetings - 2:
            partition = "train"
        elif i == cfg.n_meetings - 2:
            partition = "validation"
        else:
            partition = "test"
        meetings.append(make_meeting(i, partition, cfg))
    return meetings, make_word_vectors(cfg)


def write_corpus(out_dir, cfg: SyntheticConfig = SyntheticConfig()
                 ) -> tuple[Path, Path]:
    """Materialize the corpus and vectors as files (for the CLI demo)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meetings, vectors = generate_corpus(cfg)
    docs = []
    for m in meetings:
        docs.append({
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
                {"id": c.id, "section": c.section,
                 "members": sorted(c.members)}
                for c in m.communities
            ],
        })
    corpus_path = out_dir / "corpus.json"
    corpus_path.write_text(json.dumps(docs, indent=1), encoding="utf-8")
    vec_path = out_dir / "vectors.txt"
    with open(vec_path, "w", encoding="utf-8") as f:
        words = sorted(
            w for w in
            [*filler_words(), *(w for q in range(4) for w in topic_words(q))]
        )
        f.write(f"{len(words)} {_VECTOR_DIM}\n")
        for w in words:
            vec = vectors.get(w)
            f.write(w + " " + " ".join(repr(x) for x in vec) + "\n")
    return corpus_path, vec_path


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "synthetic_corpus"
    corpus_path, vec_path = write_corpus(target)
    print(f"wrote {corpus_path} and {vec_path}")
