"""Corpus ingestion, community classification, PCA, token features."""
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convcomm.corpus import (
    Community,
    FeaturePipeline,
    classify_community,
    fit_pca,
    load_corpus,
    merge_nested,
    FEATURE_DIM,
    TEXT_DIM,
    WordVectors,
)
from convcomm.errors import CorpusError

from conftest import make_meeting, make_pipeline, make_word_vectors, write_corpus_file


# ---------------------------------------------------------------------------
# ingestion


def _valid_doc():
    return {
        "meeting_id": "M1",
        "partition": "train",
        "utterances": [
            {"index": 0, "role": "PM", "dialogue_act": "inf",
             "tokens": ["hello", "there"], "summary_worthy": True},
            {"index": 1, "role": "ID", "dialogue_act": "sug",
             "tokens": ["vocalsound", "ok"], "summary_worthy": True},
        ],
        "communities": [
            {"id": "c1", "section": "abstract", "members": [0, 1]},
        ],
    }


def test_load_corpus_empty_file(tmp_path):
    p = tmp_path / "corpus.json"
    p.write_text("[]")
    assert load_corpus(p) == []


def test_load_corpus_filters_asr_tags(tmp_path):
    p = tmp_path / "corpus.json"
    p.write_text(json.dumps([_valid_doc()]))
    (meeting,) = load_corpus(p)
    assert meeting.utterances[1].tokens == ("ok",)


def test_load_corpus_rejects_out_of_range_member(tmp_path):
    doc = _valid_doc()
    doc["communities"][0]["members"] = [0, 2]
    p = tmp_path / "corpus.json"
    p.write_text(json.dumps([doc]))
    with pytest.raises(CorpusError, match=r"index 2 outside 0\.\.1"):
        load_corpus(p)


def test_load_corpus_rejects_non_worthy_member(tmp_path):
    doc = _valid_doc()
    doc["utterances"][1]["summary_worthy"] = False
    p = tmp_path / "corpus.json"
    p.write_text(json.dumps([doc]))
    with pytest.raises(CorpusError, match="not summary-worthy"):
        load_corpus(p)


def test_load_corpus_rejects_unknown_role_with_field_path(tmp_path):
    doc = _valid_doc()
    doc["utterances"][0]["role"] = "CEO"
    p = tmp_path / "corpus.json"
    p.write_text(json.dumps([doc]))
    with pytest.raises(CorpusError, match=r"M1: utterances\[0\].role"):
        load_corpus(p)


def test_load_corpus_rejects_gap_in_indices(tmp_path):
    doc = _valid_doc()
    doc["utterances"][1]["index"] = 5
    p = tmp_path / "corpus.json"
    p.write_text(json.dumps([doc]))
    with pytest.raises(CorpusError, match="contiguous"):
        load_corpus(p)


def test_load_corpus_rejects_empty_after_filtering(tmp_path):
    doc = _valid_doc()
    doc["utterances"][0]["tokens"] = ["vocalsound"]
    p = tmp_path / "corpus.json"
    p.write_text(json.dumps([doc]))
    with pytest.raises(CorpusError, match="tag filtering"):
        load_corpus(p)


def test_load_corpus_jsonl(tmp_path):
    p = tmp_path / "corpus.jsonl"
    p.write_text(json.dumps(_valid_doc()) + "\n")
    assert len(load_corpus(p)) == 1


def test_corpus_file_roundtrip(tmp_path):
    m = make_meeting("M9", [["a"], ["b", "c"]], [{0, 1}], partition="test")
    p = write_corpus_file(tmp_path / "c.json", [m])
    (loaded,) = load_corpus(p)
    assert loaded == m


# ---------------------------------------------------------------------------
# community classification


def _comms(*member_sets):
    return [
        Community(f"c{i}", "abstract", frozenset(m))
        for i, m in enumerate(member_sets)
    ]


def test_classify_singleton():
    cs = _comms({1})
    assert classify_community(cs[0], cs) == "singleton"


def test_classify_nested_pair():
    cs = _comms({1, 2}, {1, 2, 3})
    assert classify_community(cs[0], cs) == "nested"
    assert classify_community(cs[1], cs) == "nested"


def test_classify_overlapping():
    cs = _comms({1, 2}, {2, 3})
    assert classify_community(cs[0], cs) == "overlapping"
    assert classify_community(cs[1], cs) == "overlapping"


def test_classify_disjoint():
    cs = _comms({1, 2}, {3, 4})
    assert classify_community(cs[0], cs) == "disjoint"


def test_classify_singleton_wins_over_nested():
    cs = _comms({1}, {1, 2})
    assert classify_community(cs[0], cs) == "singleton"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.frozensets(st.integers(0, 6), min_size=1, max_size=4),
                min_size=1, max_size=5))
def test_classify_partitions_every_community(member_sets):
    cs = _comms(*member_sets)
    labels = {"singleton", "nested", "overlapping", "disjoint"}
    for c in cs:
        assert classify_community(c, cs) in labels


# ---------------------------------------------------------------------------
# nested merge


def test_merge_nested_simple():
    merged = merge_nested(_comms({1, 2}, {1, 2, 3}))
    assert [set(c.members) for c in merged] == [{1, 2, 3}]


def test_merge_nested_chain_to_fixpoint():
    merged = merge_nested(_comms({1}, {1, 2}, {1, 2, 3}))
    assert [set(c.members) for c in merged] == [{1, 2, 3}]


def test_merge_nested_containment_free_unchanged():
    cs = _comms({1, 2}, {2, 3}, {5})
    assert merge_nested(cs) == cs


@settings(max_examples=40, deadline=None)
@given(st.lists(st.frozensets(st.integers(0, 8), min_size=1, max_size=5),
                min_size=1, max_size=6))
def test_merge_nested_idempotent_and_union_preserving(member_sets):
    cs = _comms(*member_sets)
    merged = merge_nested(cs)
    assert merge_nested(merged) == merged
    union_before = set().union(*(c.members for c in cs))
    union_after = set().union(*(c.members for c in merged))
    assert union_before == union_after
    for a in merged:
        for b in merged:
            assert a is b or not a.members < b.members


# ---------------------------------------------------------------------------
# PCA


def test_pca_recovers_exact_subspace():
    rng = np.random.default_rng(0)
    basis = rng.normal(size=(5, 30))
    X = rng.normal(size=(100, 5)) @ basis
    pca = fit_pca(X, out_dim=5)
    Z = pca.project(X)
    recon = Z @ pca.components + pca.mean
    assert np.abs(recon - X).max() <= 1e-8


def test_pca_mean_projects_to_zero():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 12))
    pca = fit_pca(X, out_dim=4)
    assert np.allclose(pca.project(X.mean(axis=0)), 0.0, atol=1e-10)


def test_pca_components_orthonormal_and_sign_fixed():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 40))
    pca = fit_pca(X, out_dim=10)
    gram = pca.components @ pca.components.T
    assert np.allclose(gram, np.eye(10), atol=1e-6)
    for row in pca.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_pca_isotropic_explained_variance():
    # covariance of isotropic data: each axis carries ~1/D of the variance
    rng = np.random.default_rng(3)
    D, n, out = 300, 9000, 21
    X = rng.normal(size=(n, D))
    pca = fit_pca(X, out_dim=out)
    Z = pca.project(X)
    total = ((X - X.mean(0)) ** 2).sum() / (n - 1)
    fractions = Z.var(axis=0, ddof=1) / total
    assert np.all(fractions > 0.8 / D)
    assert np.all(fractions < 1.9 / D)


def test_pca_rank_deficient_raises():
    X = np.ones((30, 10)) * np.arange(10)
    with pytest.raises(CorpusError, match="rank"):
        fit_pca(X, out_dim=3)


def test_pca_projection_of_training_vectors_is_centered():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(80, 25)) + 3.0
    pca = fit_pca(X, out_dim=6)
    assert np.abs(pca.project(X).mean(axis=0)).max() <= 1e-8


# ---------------------------------------------------------------------------
# token features


def test_token_feature_layout_and_position():
    m = make_meeting("M", [["a"], ["b"], ["c"]], [{0, 1, 2}])
    pipe = make_pipeline([m])
    f0 = pipe.token_feature(m, 0, 0)
    f2 = pipe.token_feature(m, 2, 0)
    assert f0.shape == (FEATURE_DIM,)
    assert f0[-1] == 0.0  # first utterance
    assert f2[-1] == 1.0  # last utterance
    role_block = f0[TEXT_DIM : TEXT_DIM + 4]
    da_block = f0[TEXT_DIM + 4 : TEXT_DIM + 20]
    assert role_block.sum() == 1.0
    assert da_block.sum() == 1.0


def test_token_feature_single_utterance_position_zero():
    m = make_meeting("M", [["a"]], [{0}])
    pipe = make_pipeline([m])
    assert pipe.token_feature(m, 0, 0)[-1] == 0.0


def test_oov_vector_is_cached_and_order_independent():
    m = make_meeting("M", [["known"]], [{0}])
    pipe_a = make_pipeline([m])
    pipe_b = make_pipeline([m])
    # query in different orders; OOV vectors depend only on (seed, token)
    a1 = pipe_a.token_text("mystery")
    a2 = pipe_a.token_text("enigma")
    b2 = pipe_b.token_text("enigma")
    b1 = pipe_b.token_text("mystery")
    assert np.array_equal(a1, b1)
    assert np.array_equal(a2, b2)
    assert np.array_equal(a1, pipe_a.token_text("mystery"))
    assert np.all(np.abs(a1) <= 0.05)


def test_oov_vectors_differ_between_tokens_and_seeds():
    wv = make_word_vectors([f"w{i}" for i in range(60)])
    from convcomm.corpus import fit_pca as _fit

    pca = _fit([wv.get(f"w{i}") for i in range(60)], out_dim=TEXT_DIM)
    p0 = FeaturePipeline(wv, pca, oov_seed=0)
    p1 = FeaturePipeline(wv, pca, oov_seed=1)
    assert not np.array_equal(p0.token_text("oovword"), p1.token_text("oovword"))
    assert not np.array_equal(p0.token_text("oova"), p0.token_text("oovb"))


def test_word_vectors_text_format(tmp_path):
    p = tmp_path / "vecs.txt"
    p.write_text("2 3\nfoo 1.0 2.0 3.0\nbar -1 0.5 0\n")
    wv = WordVectors.from_text_file(p)
    assert wv.dim == 3
    assert np.array_equal(wv.get("foo"), [1.0, 2.0, 3.0])
    assert "bar" in wv and "baz" not in wv


def test_word_vectors_without_header(tmp_path):
    p = tmp_path / "vecs.txt"
    p.write_text("foo 1.0 2.0\nbar 3.0 4.0\n")
    wv = WordVectors.from_text_file(p)
    assert wv.dim == 2
    assert len(wv) == 2
