"""Transcript ingestion, community structure, and 42-dim token features.

The transcript schema is one JSON object per meeting (a single JSON
array, a single object, or JSON lines):

    {"meeting_id": str,
     "partition": "train"|"validation"|"test",
     "utterances": [{"index": int, "role": str, "dialogue_act": str,
                     "tokens": [str], "summary_worthy": bool}],
     "communities": [{"id": str,
                      "section": "abstract"|"action"|"problem"|"decision",
                      "members": [int]}]}

Token features are 42-dimensional: a 21-dim PCA-reduced word vector
(per-token persistent random vectors for out-of-vocabulary words),
a 4-dim speaker-role one-hot, a 16-dim dialogue-act one-hot, and the
utterance's normalized position in the transcript.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorpusError

SPEAKER_ROLES = ("PM", "ME", "UI", "ID")
DIALOGUE_ACTS = (
    "ass", "bck", "be.neg", "be.pos", "el.ass", "el.inf", "el.sug",
    "el.und", "fra", "inf", "off", "oth", "stl", "sug", "und", "unl",
)
SECTIONS = ("abstract", "action", "problem", "decision")
PARTITIONS = ("train", "validation", "test")

# ASR markup dropped at ingestion; configurable via load_corpus
DEFAULT_TAG_BLOCKLIST = frozenset(
    {"vocalsound", "nonvocalsound", "disfmarker", "gap", "pause"}
)

TEXT_DIM = 21
DISCOURSE_DIM = len(SPEAKER_ROLES) + len(DIALOGUE_ACTS) + 1
FEATURE_DIM = TEXT_DIM + DISCOURSE_DIM  # 42

_ROLE_INDEX = {r: i for i, r in enumerate(SPEAKER_ROLES)}
_DA_INDEX = {d: i for i, d in enumerate(DIALOGUE_ACTS)}


@dataclass(frozen=True)
class Utterance:
    index: int
    tokens: tuple[str, ...]
    speaker_role: str
    dialogue_act: str
    summary_worthy: bool


@dataclass(frozen=True)
class Community:
    id: str
    section: str
    members: frozenset[int]


@dataclass(frozen=True)
class Meeting:
    meeting_id: str
    partition: str
    utterances: tuple[Utterance, ...]
    communities: tuple[Community, ...]

    def __len__(self) -> int:
        return len(self.utterances)


# ---------------------------------------------------------------------------
# ingestion


def _require(cond: bool, meeting_id: str, path: str, message: str) -> None:
    if not cond:
        raise CorpusError(f"{meeting_id}: {path}: {message}")


def _parse_meeting(doc: dict, blocklist: frozenset[str]) -> Meeting:
    mid = doc.get("meeting_id")
    if not isinstance(mid, str) or not mid:
        raise CorpusError("<unknown>: meeting_id: missing or empty")
    partition = doc.get("partition")
    _require(partition in PARTITIONS, mid, "partition",
             f"expected one of {PARTITIONS}, got {partition!r}")

    raw_utts = doc.get("utterances")
    _require(isinstance(raw_utts, list), mid, "utterances", "expected a list")
    utterances = []
    for i, u in enumerate(raw_utts):
        loc = f"utterances[{i}]"
        _require(isinstance(u, dict), mid, loc, "expected an object")
        _require(u.get("index") == i, mid, f"{loc}.index",
                 f"indices must be contiguous 0..T-1, got {u.get('index')!r}")
        role = u.get("role")
        _require(role in _ROLE_INDEX, mid, f"{loc}.role",
                 f"unknown speaker role {role!r}")
        da = u.get("dialogue_act")
        _require(da in _DA_INDEX, mid, f"{loc}.dialogue_act",
                 f"unknown dialogue act {da!r}")
        raw_tokens = u.get("tokens")
        _require(isinstance(raw_tokens, list)
                 and all(isinstance(t, str) for t in raw_tokens),
                 mid, f"{loc}.tokens", "expected a list of strings")
        tokens = tuple(t for t in raw_tokens if t.lower() not in blocklist)
        _require(len(tokens) > 0, mid, f"{loc}.tokens",
                 "no tokens left after tag filtering")
        worthy = u.get("summary_worthy")
        _require(isinstance(worthy, bool), mid, f"{loc}.summary_worthy",
                 "expected a boolean")
        utterances.append(Utterance(i, tokens, role, da, worthy))

    T = len(utterances)
    raw_comms = doc.get("communities", [])
    _require(isinstance(raw_comms, list), mid, "communities", "expected a list")
    communities = []
    for j, c in enumerate(raw_comms):
        loc = f"communities[{j}]"
        _require(isinstance(c, dict), mid, loc, "expected an object")
        cid = c.get("id")
        _require(isinstance(cid, str) and cid, mid, f"{loc}.id",
                 "missing or empty id")
        section = c.get("section")
        _require(section in SECTIONS, mid, f"{loc}.section",
                 f"expected one of {SECTIONS}, got {section!r}")
        members = c.get("members")
        _require(isinstance(members, list) and len(members) > 0,
                 mid, f"{loc}.members", "expected a non-empty list")
        for t in members:
            _require(isinstance(t, int) and 0 <= t < T, mid, f"{loc}.members",
                     f"utterance index {t} outside 0..{T - 1}")
            _require(utterances[t].summary_worthy, mid, f"{loc}.members",
                     f"utterance {t} is not summary-worthy")
        communities.append(Community(cid, section, frozenset(members)))

    return Meeting(mid, partition, tuple(utterances), tuple(communities))


def load_corpus(path, tag_blocklist=DEFAULT_TAG_BLOCKLIST) -> list[Meeting]:
    """Load and validate meetings from a JSON array / object / JSONL file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    blocklist = frozenset(t.lower() for t in tag_blocklist)
    if path.suffix == ".jsonl":
        docs = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        parsed = json.loads(text) if text.strip() else []
        docs = parsed if isinstance(parsed, list) else [parsed]
    meetings = [_parse_meeting(doc, blocklist) for doc in docs]
    seen = set()
    for m in meetings:
        if m.meeting_id in seen:
            raise CorpusError(f"{m.meeting_id}: meeting_id: duplicate")
        seen.add(m.meeting_id)
    return meetings


# ---------------------------------------------------------------------------
# community structure


def classify_community(c: Community, all_communities) -> str:
    """Label a community as singleton, nested, overlapping, or disjoint.

    Precedence: singleton first, then nested (strict containment in
    either direction), then overlapping (shared member, no containment).
    """
    if len(c.members) == 1:
        return "singleton"
    others = [o for o in all_communities if o is not c]
    for o in others:
        if c.members < o.members or o.members < c.members:
            return "nested"
    for o in others:
        if c.members & o.members:
            return "overlapping"
    return "disjoint"


def merge_nested(communities) -> list[Community]:
    """Union strictly nested communities into their containers.

    Repeated to fixpoint: the result contains no strict-containment
    pairs and covers exactly the same utterances.
    """
    current = list(communities)
    while True:
        keep = [
            c
            for c in current
            if not any(c is not o and c.members < o.members for o in current)
        ]
        if len(keep) == len(current):
            return keep
        current = keep


# ---------------------------------------------------------------------------
# word vectors and PCA


class WordVectors:
    """Pretrained word vectors from a plain-text `word v1 ... vD` file."""

    def __init__(self, table: dict[str, np.ndarray], dim: int):
        self._table = table
        self.dim = dim

    @classmethod
    def from_text_file(cls, path) -> "WordVectors":
        table: dict[str, np.ndarray] = {}
        dim = None
        with open(path, encoding="utf-8") as f:
            first = f.readline()
            parts = first.split()
            header = len(parts) == 2 and all(p.lstrip("-").isdigit() for p in parts)
            if not header and parts:
                table[parts[0]] = np.array([float(x) for x in parts[1:]])
                dim = len(parts) - 1
            for line in f:
                parts = line.split()
                if not parts:
                    continue
                vec = np.array([float(x) for x in parts[1:]])
                if dim is None:
                    dim = vec.size
                elif vec.size != dim:
                    raise CorpusError(
                        f"word vectors: '{parts[0]}' has {vec.size} dims, "
                        f"expected {dim}"
                    )
                table[parts[0]] = vec
        if dim is None:
            raise CorpusError("word vectors: empty file")
        return cls(table, dim)

    def __contains__(self, token: str) -> bool:
        return token in self._table

    def __len__(self) -> int:
        return len(self._table)

    def get(self, token: str):
        return self._table.get(token)


@dataclass(frozen=True)
class PcaProjection:
    """Mean vector plus orthonormal principal axes (rows)."""

    mean: np.ndarray
    components: np.ndarray  # (out_dim, in_dim)

    def project(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components.T


def fit_pca(vectors, out_dim: int = TEXT_DIM) -> PcaProjection:
    """Principal axes by descending variance with a fixed sign convention
    (largest-magnitude entry of each component is positive)."""
    X = np.asarray(list(vectors), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise CorpusError("fit_pca: need at least two vectors")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    tol = max(X.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    rank = int((s > tol).sum())
    if rank < out_dim:
        raise CorpusError(
            f"fit_pca: data rank {rank} is below the requested {out_dim} components"
        )
    components = Vt[:out_dim].copy()
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PcaProjection(mean, components)


# ---------------------------------------------------------------------------
# token features


def _stable_token_hash(token: str) -> tuple[int, int]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    return value & 0xFFFFFFFF, (value >> 32) & 0xFFFFFFFF


class FeaturePipeline:
    """Maps (meeting, utterance, token) to 42-dim feature vectors.

    Out-of-vocabulary tokens get a persistent uniform(-0.05, 0.05)
    vector derived from (oov_seed, token), so features are independent
    of encounter order. Meeting feature matrices are cached.
    """

    def __init__(self, word_vectors: WordVectors, pca: PcaProjection,
                 oov_seed: int = 0):
        self.word_vectors = word_vectors
        self.pca = pca
        self.oov_seed = int(oov_seed)
        self._oov_cache: dict[str, np.ndarray] = {}
        self._meeting_cache: dict[str, list[np.ndarray]] = {}

    def token_text(self, token: str) -> np.ndarray:
        """21-dim textual representation of one token."""
        vec = self.word_vectors.get(token)
        if vec is not None:
            return self.pca.project(vec)
        cached = self._oov_cache.get(token)
        if cached is None:
            lo, hi = _stable_token_hash(token)
            rng = np.random.default_rng(
                np.random.SeedSequence([self.oov_seed & 0xFFFFFFFF, lo, hi])
            )
            cached = rng.uniform(-0.05, 0.05, TEXT_DIM)
            self._oov_cache[token] = cached
        return cached

    def discourse(self, meeting: Meeting, t: int) -> np.ndarray:
        """21-dim discourse block: role one-hot ++ DA one-hot ++ position."""
        u = meeting.utterances[t]
        out = np.zeros(DISCOURSE_DIM)
        out[_ROLE_INDEX[u.speaker_role]] = 1.0
        out[len(SPEAKER_ROLES) + _DA_INDEX[u.dialogue_act]] = 1.0
        T = len(meeting)
        out[-1] = t / (T - 1) if T > 1 else 0.0
        return out

    def token_feature(self, meeting: Meeting, t: int, i: int) -> np.ndarray:
        u = meeting.utterances[t]
        return np.concatenate(
            [self.token_text(u.tokens[i]), self.discourse(meeting, t)]
        )

    def utterance_features(self, meeting: Meeting, t: int) -> np.ndarray:
        """(N, 42) feature matrix for utterance t."""
        disc = self.discourse(meeting, t)
        rows = [
            np.concatenate([self.token_text(tok), disc])
            for tok in meeting.utterances[t].tokens
        ]
        return np.stack(rows)

    def meeting_features(self, meeting: Meeting) -> list[np.ndarray]:
        cached = self._meeting_cache.get(meeting.meeting_id)
        if cached is None:
            cached = [
                self.utterance_features(meeting, t) for t in range(len(meeting))
            ]
            self._meeting_cache[meeting.meeting_id] = cached
        return cached

    def export_state(self) -> dict[str, np.ndarray]:
        """Arrays needed to rebuild the projection at evaluation time."""
        return {"pca.mean": self.mean_array(), "pca.components": self.pca.components}

    def mean_array(self) -> np.ndarray:
        return self.pca.mean


def build_feature_pipeline(meetings, word_vectors: WordVectors, seed: int = 0,
                           text_dim: int = TEXT_DIM) -> FeaturePipeline:
    """Fit the text PCA on in-vocabulary tokens of the training partition
    (falls back to all partitions when no training meetings exist)."""
    pool = [m for m in meetings if m.partition == "train"] or list(meetings)
    vocab = sorted(
        {
            tok
            for m in pool
            for u in m.utterances
            for tok in u.tokens
            if tok in word_vectors
        }
    )
    if len(vocab) < text_dim:
        raise CorpusError(
            f"only {len(vocab)} in-vocabulary tokens available; "
            f"need at least {text_dim} to fit the PCA"
        )
    pca = fit_pca([word_vectors.get(t) for t in vocab], out_dim=text_dim)
    return FeaturePipeline(word_vectors, pca, oov_seed=seed)
