"""Contextual utterance encoder: attention behavior, windows, gradients."""
import numpy as np
import pytest

from convcomm.encoder import (
    EncoderConfig,
    attention_details,
    build_batch,
    content_aware_attention,
    encode_batch,
    encode_context,
    encode_utterance,
    init_encoder_params,
    time_decay_weights,
)
from convcomm.errors import ConfigurationError
from convcomm.nn import ParamStore, grad_check
from convcomm.nn import tensor as T

from conftest import make_meeting, make_pipeline


def _setup(meeting, d=6, d_f=4, c_pre=2, c_post=2, seed=0):
    cfg = EncoderConfig(d=d, d_f=d_f, c_pre=c_pre, c_post=c_post, max_tokens=8)
    pipe = make_pipeline([meeting], seed=seed)
    feats = pipe.meeting_features(meeting)
    store = init_encoder_params(cfg, np.random.default_rng(seed))
    return cfg, feats, store


@pytest.fixture
def small(toy_meeting):
    return _setup(toy_meeting)


# ---------------------------------------------------------------------------
# config validation


def test_config_rejects_odd_d():
    with pytest.raises(ConfigurationError):
        EncoderConfig(d=7)


def test_config_rejects_negative_context():
    with pytest.raises(ConfigurationError):
        EncoderConfig(c_pre=-1)


# ---------------------------------------------------------------------------
# word encoder


def test_word_encoder_zero_weights_zero_output(toy_meeting, small):
    cfg, feats, store = small
    store["word.W"].data[:] = 0.0
    store["word.b"].data[:] = 0.0
    # zero token vectors make the current-utterance summary zero, and with
    # zero GRU inputs + zero context everything downstream sees only biases
    emb1 = encode_utterance(store, feats, 1, cfg)
    emb2 = encode_utterance(store, feats, 4, cfg)
    # all inputs identical -> identical embeddings regardless of tokens
    assert np.allclose(emb1, emb2, atol=1e-12)


def test_inference_is_deterministic(small):
    cfg, feats, store = small
    a = encode_utterance(store, feats, 2, cfg)
    b = encode_utterance(store, feats, 2, cfg)
    assert np.array_equal(a, b)


def test_token_identical_utterances_same_embedding():
    tokens = [["x", "y"], ["a", "b"], ["x", "y"]]
    m1 = make_meeting("m1", tokens, [{0, 1, 2}])
    m2 = make_meeting("m2", tokens, [{0, 1, 2}])
    cfg, feats1, store = _setup(m1, c_pre=1, c_post=1)
    pipe = make_pipeline([m1])  # same vocabulary/seed as _setup's pipeline
    feats2 = pipe.meeting_features(m2)
    a = encode_utterance(store, feats1, 1, cfg)
    b = encode_utterance(store, feats2, 1, cfg)
    assert np.allclose(a, b, atol=1e-12)


# ---------------------------------------------------------------------------
# content-aware attention


def test_content_attention_uniform_when_query_zero(small):
    cfg, feats, store = small
    store["att_ctx.u"].data[:] = 0.0
    tokens = np.random.default_rng(0).normal(size=(4, cfg.d))
    alpha, pooled = content_aware_attention(store, tokens, np.zeros(cfg.d))
    assert np.allclose(alpha, 0.25)
    assert np.allclose(pooled, tokens.mean(axis=0))


def test_content_attention_single_token(small):
    cfg, feats, store = small
    token = np.random.default_rng(1).normal(size=(1, cfg.d))
    alpha, pooled = content_aware_attention(store, token, np.zeros(cfg.d))
    assert np.allclose(alpha, [1.0])
    assert np.allclose(pooled, token[0])


def test_content_attention_is_content_aware(small):
    cfg, feats, store = small
    rng = np.random.default_rng(2)
    tokens = rng.normal(size=(5, cfg.d))
    alpha_a, _ = content_aware_attention(store, tokens, rng.normal(size=cfg.d))
    alpha_b, _ = content_aware_attention(store, tokens, rng.normal(size=cfg.d))
    assert not np.allclose(alpha_a, alpha_b)


def test_bidirectional_information_pathway(toy_meeting, small):
    # changing a token of the current utterance changes alpha over the
    # previous one (information flows current -> context)
    cfg, feats, store = small
    base = attention_details(store, feats, 2, cfg)
    bumped = [f.copy() for f in feats]
    bumped[2] = bumped[2].copy()
    bumped[2][0, :3] += 1.0
    after = attention_details(store, bumped, 2, cfg)
    a0 = base["pre"][0]["alpha"]
    a1 = after["pre"][0]["alpha"]
    assert not np.allclose(a0, a1)


# ---------------------------------------------------------------------------
# time decay


def test_decay_single_offset_normalizes_to_one(small):
    cfg, feats, store = small
    w = time_decay_weights(store, "pre", [1])
    assert w.shape == (1,)
    assert w[0] == pytest.approx(1.0, abs=1e-6)


def test_decay_convex_only_is_decreasing(small):
    cfg, feats, store = small
    # push the linear and concave mixture weights to ~0 (softplus(-40) ~ 0)
    store["decay.pre.w2"].data = np.array(-40.0)
    store["decay.pre.w3"].data = np.array(-40.0)
    w = time_decay_weights(store, "pre", [1, 2, 3, 4, 5])
    assert np.all(np.diff(w) < 0)


def test_decay_random_params_normalized(small):
    cfg, feats, store = small
    rng = np.random.default_rng(3)
    for name in ("w1", "w2", "w3", "a", "b", "e", "k", "D0", "l"):
        store[f"decay.post.{name}"].data = np.array(rng.normal(scale=0.7))
    w = time_decay_weights(store, "post", [1, 2, 3, 4, 5])
    assert np.all(w >= 0.0)
    # the +1e-8 guard in the normalizer bounds the sum just below 1
    assert abs(w.sum() - 1.0) <= 5e-8


def test_decay_rejects_offsets_below_one(small):
    cfg, feats, store = small
    with pytest.raises(ConfigurationError):
        time_decay_weights(store, "pre", [0, 1])


# ---------------------------------------------------------------------------
# context windows


def test_empty_pre_window_is_zero_vector(small):
    cfg, feats, store = small
    assert np.array_equal(encode_context(store, feats, 0, cfg, "pre"),
                          np.zeros(cfg.d))


def test_empty_post_window_is_zero_vector(small):
    cfg, feats, store = small
    T_len = len(feats)
    assert np.array_equal(
        encode_context(store, feats, T_len - 1, cfg, "post"), np.zeros(cfg.d)
    )


def test_single_neighbor_window_equals_pooled_vector(toy_meeting):
    cfg, feats, store = _setup(toy_meeting, c_pre=1, c_post=0)
    ctx = encode_context(store, feats, 2, cfg, "pre")
    # oracle: word-encode utterance 1 and pool with content attention
    with T.no_grad():
        tok = T.tanh(
            T.add(T.matmul(feats[1], store["word.W"]), store["word.b"])
        ).data
        cur = T.tanh(
            T.add(T.matmul(feats[2], store["word.W"]), store["word.b"])
        ).data.sum(axis=0)
    _, pooled = content_aware_attention(store, tok, cur)
    # single slot: time weight is beta/(beta + 1e-8) ~ 1
    assert np.allclose(ctx, pooled, atol=1e-7)


def test_identical_neighbors_make_decay_irrelevant():
    # both pre neighbors token-identical: the context vector is a convex
    # combination of equal vectors regardless of beta
    tokens = [["q", "r"], ["q", "r"], ["z", "z", "w"]]
    m = make_meeting("m", tokens, [{0, 1, 2}],
                     roles=["PM", "PM", "ME"], das=["inf", "inf", "sug"])
    cfg, feats, store = _setup(m, c_pre=2, c_post=0)
    # make the two neighbor feature matrices exactly identical (kill the
    # position component, which differs by construction)
    feats = [f.copy() for f in feats]
    feats[0][:, -1] = 0.0
    feats[1][:, -1] = 0.0
    ctx = encode_context(store, feats, 2, cfg, "pre")
    with T.no_grad():
        tok = T.tanh(
            T.add(T.matmul(feats[0], store["word.W"]), store["word.b"])
        ).data
        cur = T.tanh(
            T.add(T.matmul(feats[2], store["word.W"]), store["word.b"])
        ).data.sum(axis=0)
    _, pooled = content_aware_attention(store, tok, cur)
    assert np.allclose(ctx, pooled, atol=1e-7)


def test_zero_context_config_still_emits_embedding(toy_meeting):
    cfg, feats, store = _setup(toy_meeting, c_pre=0, c_post=0)
    emb = encode_utterance(store, feats, 3, cfg)
    assert emb.shape == (cfg.d_f,)
    assert np.isfinite(emb).all()


# ---------------------------------------------------------------------------
# attention distributions & padding


def test_attention_distributions_sum_to_one(small):
    cfg, feats, store = small
    details = attention_details(store, feats, 2, cfg)
    gamma = np.array(details["gamma"])
    assert gamma.min() >= 0
    assert abs(gamma.sum() - 1.0) <= 1e-10
    for side in ("pre", "post"):
        betas = [e["beta"] for e in details[side]]
        assert all(b >= 0 for b in betas)
        assert abs(sum(betas) - 1.0) <= 5e-8
        for entry in details[side]:
            alpha = np.array(entry["alpha"])
            assert alpha.min() >= 0
            assert abs(alpha.sum() - 1.0) <= 1e-10


def test_embedding_invariant_to_padding_length(small):
    cfg, feats, store = small
    n = feats[2].shape[0]
    a = encode_utterance(store, feats, 2, cfg, pad_to=n)
    b = encode_utterance(store, feats, 2, cfg, pad_to=n + 5)
    assert np.allclose(a, b, atol=1e-12)


def test_batched_and_single_encoding_agree(small):
    cfg, feats, store = small
    with T.no_grad():
        batched = encode_batch(store, [(feats, t) for t in range(6)], cfg).data
    for t in range(6):
        single = encode_utterance(store, feats, t, cfg)
        assert np.allclose(batched[t], single, atol=1e-12)


def test_weight_sharing_pre_post_alpha_single_parameter_set(small):
    cfg, feats, store = small
    names = store.names()
    assert sum(1 for n in names if n.startswith("att_ctx.")) == 4
    assert "decay.pre.w1" in names and "decay.post.w1" in names


def test_truncation_cap_applies():
    m = make_meeting("m", [["w"] * 30, ["x", "y"]], [{0, 1}])
    cfg = EncoderConfig(d=6, d_f=4, c_pre=1, c_post=1, max_tokens=5)
    batch = build_batch([(make_pipeline([m]).meeting_features(m), 0)], cfg)
    assert batch.cur.shape[1] == 5


# ---------------------------------------------------------------------------
# gradients through the whole encoder


def _encoder_loss(store, feats, cfg, which):
    from convcomm.energy import (
        EnergyConfig,
        example_batch_loss,
    )
    from convcomm.sampling import PairExample, TripletExample, UttRef

    def ref(i):
        return UttRef("toy", i)

    feats_by = {"toy": feats}
    if which == "triplet":
        examples = [
            TripletExample(ref(0), ref(1), ref(3)),
            TripletExample(ref(4), ref(5), ref(2)),
        ]
        cfg_e = EnergyConfig(meta="triplet")
    else:
        examples = [
            PairExample(ref(0), ref(2), 0),
            PairExample(ref(1), ref(4), 1),
        ]
        cfg_e = EnergyConfig(meta="siamese")

    def loss():
        return example_batch_loss(store, examples, feats_by, cfg, cfg_e)

    return loss


@pytest.mark.parametrize("which", ["triplet", "siamese"])
def test_full_encoder_gradients_small_config(toy_meeting, which):
    # five-utterance-window config, all parameters, both losses
    cfg, feats, store = _setup(toy_meeting, d=4, d_f=3, c_pre=2, c_post=2)
    worst = grad_check(_encoder_loss(store, feats, cfg, which), store, eps=1e-4)
    bad = {k: v for k, v in worst.items() if v > 1e-4}
    assert not bad, f"gradient mismatches: {bad}"
