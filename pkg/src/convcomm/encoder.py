"""Contextual utterance encoder.

Pipeline per utterance t:

  1. word encoder: dense(42 -> d, tanh) over token features, dropout
     here and only here;
  2. content-aware attention pools each context utterance's token
     vectors, conditioned on the sum of the current utterance's token
     vectors (shared weights for the pre and post windows);
  3. a learned mixture of convex / linear / concave time-decay
     functions weights the pooled context vectors into one pre and one
     post context vector (separate parameters per side);
  4. the sequence [u_pre, tokens, u_post] runs through a bidirectional
     GRU (hidden size d per direction);
  5. basic self-attention over the annotations, then a linear dense
     layer down to the d_f-dim utterance embedding.

Encoding works on padded batches; padded positions carry zero attention
mass and the GRU carries its state through them, so embeddings are
exactly invariant to the pad length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import FEATURE_DIM
from .errors import ConfigurationError
from .nn import ParamStore, glorot_uniform, init_gru_params
from .nn import tensor as T
from .nn.functional import dropout as _dropout
from .nn.gru import gru_sequence
from .nn.tensor import Tensor

# raw value whose softplus is exactly 1
_SOFTPLUS_INV_ONE = math.log(math.expm1(1.0))

_DECAY_NAMES = ("w1", "w2", "w3", "a", "b", "e", "k", "D0", "l")
# softplus keeps these strictly positive; e and k stay unconstrained
_DECAY_POSITIVE = ("w1", "w2", "w3", "a", "b", "D0", "l")


@dataclass(frozen=True)
class EncoderConfig:
    """Sizes of the utterance encoder.

    ``d`` is the token representation dim (GRU input, hidden size per
    direction), ``d_f`` the output embedding dim, ``c_pre``/``c_post``
    the context window sizes, ``max_tokens`` the per-utterance
    truncation cap used when padding batches.
    """

    d: int = 42
    d_f: int = 32
    c_pre: int = 11
    c_post: int = 11
    max_tokens: int = 60

    def __post_init__(self):
        if self.d < 2 or self.d % 2 != 0:
            raise ConfigurationError(f"encoder d must be even and >= 2, got {self.d}")
        if self.d_f < 1:
            raise ConfigurationError(f"encoder d_f must be >= 1, got {self.d_f}")
        if self.c_pre < 0 or self.c_post < 0:
            raise ConfigurationError("context sizes must be >= 0")
        if self.max_tokens < 1:
            raise ConfigurationError("max_tokens must be >= 1")


def init_encoder_params(cfg: EncoderConfig, rng: np.random.Generator,
                        feature_dim: int = FEATURE_DIM) -> ParamStore:
    """All trainable tensors, Glorot weights / zero biases / uniform
    attention queries; time-decay raw scalars start every decay family
    active and decreasing."""
    d, d2 = cfg.d, 2 * cfg.d
    store = ParamStore()
    store.add("word.W", glorot_uniform(rng, (feature_dim, d)))
    store.add("word.b", np.zeros(d))
    init_gru_params(store, "gru.fw", d, d, rng)
    init_gru_params(store, "gru.bw", d, d, rng)
    # content-aware attention, shared between pre and post windows
    store.add("att_ctx.W", glorot_uniform(rng, (d, d)))
    store.add("att_ctx.Wcur", glorot_uniform(rng, (d, d)))
    store.add("att_ctx.b", np.zeros(d))
    store.add("att_ctx.u", rng.uniform(-0.05, 0.05, d))
    # basic self-attention over GRU annotations
    store.add("att_self.W", glorot_uniform(rng, (d2, d2)))
    store.add("att_self.b", np.zeros(d2))
    store.add("att_self.u", rng.uniform(-0.05, 0.05, d2))
    # time decay, one parameter set per side
    for side in ("pre", "post"):
        for name in _DECAY_NAMES:
            if name == "e":
                value = -0.1
            elif name == "k":
                value = 1.0
            else:
                value = _SOFTPLUS_INV_ONE
            store.add(f"decay.{side}.{name}", np.array(value))
    store.add("out.W", glorot_uniform(rng, (d2, cfg.d_f)))
    store.add("out.b", np.zeros(cfg.d_f))
    return store


# ---------------------------------------------------------------------------
# batch assembly


@dataclass
class _Batch:
    cur: np.ndarray            # (B, N, F)
    cur_mask: np.ndarray       # (B, N)
    pre: np.ndarray            # (B, Cp, Nc, F)
    pre_tok_mask: np.ndarray   # (B, Cp, Nc)
    pre_slot_mask: np.ndarray  # (B, Cp)
    pre_offsets: np.ndarray    # (B, Cp)
    post: np.ndarray
    post_tok_mask: np.ndarray
    post_slot_mask: np.ndarray
    post_offsets: np.ndarray


def _pad_lengths(tasks, cfg: EncoderConfig, pad_to: int | None):
    cur_max, ctx_max = 1, 1
    for feats, t in tasks:
        cur_max = max(cur_max, min(len(feats[t]), cfg.max_tokens))
        lo = max(0, t - cfg.c_pre)
        hi = min(len(feats) - 1, t + cfg.c_post)
        for s in range(lo, hi + 1):
            if s != t:
                ctx_max = max(ctx_max, min(len(feats[s]), cfg.max_tokens))
    if pad_to is not None:
        cur_max = max(cur_max, pad_to)
        ctx_max = max(ctx_max, pad_to)
    return cur_max, ctx_max


def build_batch(tasks, cfg: EncoderConfig, pad_to: int | None = None) -> _Batch:
    """Pack (meeting feature list, t) tasks into padded arrays.

    Context slot j on the pre side holds utterance t-(j+1); on the post
    side t+(j+1). Slots clipped at transcript boundaries are masked.
    """
    B = len(tasks)
    F = tasks[0][0][0].shape[1] if tasks else FEATURE_DIM
    N, Nc = _pad_lengths(tasks, cfg, pad_to)

    def blank(C):
        return (
            np.zeros((B, C, Nc, F)),
            np.zeros((B, C, Nc), dtype=bool),
            np.zeros((B, C)),
            np.ones((B, C)),  # offsets default 1 to keep log() well-defined
        )

    cur = np.zeros((B, N, F))
    cur_mask = np.zeros((B, N), dtype=bool)
    pre, pre_tok, pre_slot, pre_off = blank(cfg.c_pre)
    post, post_tok, post_slot, post_off = blank(cfg.c_post)

    for i, (feats, t) in enumerate(tasks):
        rows = feats[t][: cfg.max_tokens]
        cur[i, : len(rows)] = rows
        cur_mask[i, : len(rows)] = True
        for j in range(cfg.c_pre):
            s = t - (j + 1)
            if s >= 0:
                rows = feats[s][: cfg.max_tokens]
                pre[i, j, : len(rows)] = rows
                pre_tok[i, j, : len(rows)] = True
                pre_slot[i, j] = 1.0
                pre_off[i, j] = j + 1
        for j in range(cfg.c_post):
            s = t + (j + 1)
            if s < len(feats):
                rows = feats[s][: cfg.max_tokens]
                post[i, j, : len(rows)] = rows
                post_tok[i, j, : len(rows)] = True
                post_slot[i, j] = 1.0
                post_off[i, j] = j + 1
    return _Batch(cur, cur_mask, pre, pre_tok, pre_slot, pre_off,
                  post, post_tok, post_slot, post_off)


# ---------------------------------------------------------------------------
# forward pass


def _decay_weights_t(store: ParamStore, side: str, offsets: np.ndarray,
                     slot_mask: np.ndarray) -> Tensor:
    """Normalized time-decay weights over (B, C) integer offsets."""
    p = {name: store[f"decay.{side}.{name}"] for name in _DECAY_NAMES}
    eff = {
        name: (T.softplus(p[name]) if name in _DECAY_POSITIVE else p[name])
        for name in _DECAY_NAMES
    }
    log_off = np.log(offsets)
    convex = T.div(eff["w1"], T.mul(eff["a"], T.exp(T.mul(eff["b"], log_off))))
    linear = T.mul(eff["w2"], T.relu(T.add(T.mul(eff["e"], offsets), eff["k"])))
    concave = T.div(
        eff["w3"],
        T.add(1.0, T.exp(T.mul(eff["l"], T.sub(log_off, T.log(eff["D0"]))))),
    )
    raw = T.mul(T.add(T.add(convex, linear), concave), slot_mask)
    total = T.sum_(raw, axis=-1, keepdims=True)
    return T.div(raw, T.add(total, 1e-8))


def _context_vector(store: ParamStore, side: str, ctx_enc: Tensor,
                    tok_mask: np.ndarray, slot_mask: np.ndarray,
                    offsets: np.ndarray, cur_summary: Tensor,
                    collect: dict | None) -> Tensor:
    """Pool one side's window into a single (B, d) context vector."""
    B, C, Nc, d = ctx_enc.data.shape
    cond = T.reshape(T.matmul(cur_summary, store["att_ctx.Wcur"]), (B, 1, 1, d))
    hidden = T.tanh(
        T.add(T.add(T.matmul(ctx_enc, store["att_ctx.W"]), cond),
              store["att_ctx.b"])
    )
    scores = T.dot_last(hidden, store["att_ctx.u"])
    alpha = T.masked_softmax(scores, tok_mask, allow_empty=True)
    pooled = T.sum_(T.mul(T.reshape(alpha, (B, C, Nc, 1)), ctx_enc), axis=2)
    beta = _decay_weights_t(store, side, offsets, slot_mask)
    if collect is not None:
        collect[f"alpha_{side}"] = alpha.data.copy()
        collect[f"beta_{side}"] = beta.data.copy()
    return T.sum_(T.mul(T.reshape(beta, (B, C, 1)), pooled), axis=1)


def _forward(store: ParamStore, batch: _Batch, cfg: EncoderConfig,
             rng: np.random.Generator | None, training: bool,
             dropout_rate: float, collect: dict | None = None) -> Tensor:
    B, N, F = batch.cur.shape
    d = cfg.d

    def word_encode(x):
        h = T.tanh(T.add(T.matmul(x, store["word.W"]), store["word.b"]))
        return _dropout(h, dropout_rate, rng=rng, training=training)

    cur_enc = word_encode(batch.cur)                      # (B, N, d)
    cur_f = batch.cur_mask.astype(np.float64)
    cur_summary = T.sum_(T.mul(cur_enc, cur_f[:, :, None]), axis=1)  # (B, d)

    sides = []
    for side, ctx, tok_mask, slot_mask, offsets in (
        ("pre", batch.pre, batch.pre_tok_mask, batch.pre_slot_mask,
         batch.pre_offsets),
        ("post", batch.post, batch.post_tok_mask, batch.post_slot_mask,
         batch.post_offsets),
    ):
        if ctx.shape[1] == 0:
            sides.append(Tensor(np.zeros((B, d))))
            if collect is not None:
                collect[f"alpha_{side}"] = np.zeros((B, 0, 0))
                collect[f"beta_{side}"] = np.zeros((B, 0))
            continue
        ctx_enc = word_encode(ctx)                        # (B, C, Nc, d)
        sides.append(
            _context_vector(store, side, ctx_enc, tok_mask, slot_mask,
                            offsets, cur_summary, collect)
        )
    u_pre, u_post = sides

    seq = T.concat(
        [T.reshape(u_pre, (B, 1, d)), cur_enc, T.reshape(u_post, (B, 1, d))],
        axis=1,
    )  # (B, N+2, d)
    seq_mask = np.concatenate(
        [np.ones((B, 1)), cur_f, np.ones((B, 1))], axis=1
    )
    fw = gru_sequence(seq, seq_mask, store, "gru.fw", reverse=False)
    bw = gru_sequence(seq, seq_mask, store, "gru.bw", reverse=True)
    annotations = T.concat([fw, bw], axis=2)              # (B, N+2, 2d)

    hidden = T.tanh(
        T.add(T.matmul(annotations, store["att_self.W"]), store["att_self.b"])
    )
    scores = T.dot_last(hidden, store["att_self.u"])
    gamma = T.masked_softmax(scores, seq_mask.astype(bool))
    if collect is not None:
        collect["gamma"] = gamma.data.copy()
    attended = T.sum_(
        T.mul(T.reshape(gamma, gamma.data.shape + (1,)), annotations), axis=1
    )  # (B, 2d)
    return T.add(T.matmul(attended, store["out.W"]), store["out.b"])


# ---------------------------------------------------------------------------
# public entry points


def encode_batch(store: ParamStore, tasks, cfg: EncoderConfig,
                 rng: np.random.Generator | None = None,
                 training: bool = False, dropout_rate: float = 0.0,
                 pad_to: int | None = None) -> Tensor:
    """Encode (meeting feature list, t) tasks into a (B, d_f) Tensor."""
    if not tasks:
        raise ConfigurationError("encode_batch: empty task list")
    feat_dim = tasks[0][0][0].shape[1]
    expected = store["word.W"].data.shape[0]
    if feat_dim != expected:
        raise ConfigurationError(
            f"feature dim mismatch: parameters expect {expected}, "
            f"corpus provides {feat_dim}"
        )
    batch = build_batch(tasks, cfg, pad_to=pad_to)
    return _forward(store, batch, cfg, rng, training, dropout_rate)


def encode_utterance(store: ParamStore, features, t: int, cfg: EncoderConfig,
                     pad_to: int | None = None) -> np.ndarray:
    """Deterministic (inference-mode) embedding of one utterance."""
    with T.no_grad():
        out = encode_batch(store, [(features, t)], cfg, pad_to=pad_to)
    return out.data[0].copy()


def encode_many(store: ParamStore, features, ts, cfg: EncoderConfig,
                chunk: int = 64) -> np.ndarray:
    """Inference-mode embeddings for several utterances of one meeting."""
    rows = []
    with T.no_grad():
        for start in range(0, len(ts), chunk):
            tasks = [(features, t) for t in ts[start : start + chunk]]
            rows.append(encode_batch(store, tasks, cfg).data)
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, cfg.d_f))


def encode_context(store: ParamStore, features, t: int, cfg: EncoderConfig,
                   side: str) -> np.ndarray:
    """The (d,) pre- or post-context vector for utterance t (zero when
    the clipped window is empty)."""
    if side not in ("pre", "post"):
        raise ConfigurationError(f"side must be 'pre' or 'post', got {side!r}")
    batch = build_batch([(features, t)], cfg)
    collected: dict = {}
    with T.no_grad():
        _forward_collect_context(store, batch, cfg, collected)
    return collected[f"u_{side}"][0]


def _forward_collect_context(store, batch, cfg, out: dict) -> None:
    # lightweight re-run of the context half only
    B, N, F = batch.cur.shape
    cur_enc = T.tanh(T.add(T.matmul(batch.cur, store["word.W"]), store["word.b"]))
    cur_f = batch.cur_mask.astype(np.float64)
    cur_summary = T.sum_(T.mul(cur_enc, cur_f[:, :, None]), axis=1)
    for side, ctx, tok_mask, slot_mask, offsets in (
        ("pre", batch.pre, batch.pre_tok_mask, batch.pre_slot_mask,
         batch.pre_offsets),
        ("post", batch.post, batch.post_tok_mask, batch.post_slot_mask,
         batch.post_offsets),
    ):
        if ctx.shape[1] == 0:
            out[f"u_{side}"] = np.zeros((B, cfg.d))
            continue
        ctx_enc = T.tanh(T.add(T.matmul(ctx, store["word.W"]), store["word.b"]))
        vec = _context_vector(store, side, ctx_enc, tok_mask, slot_mask,
                              offsets, cur_summary, None)
        out[f"u_{side}"] = vec.data.copy()


def content_aware_attention(store: ParamStore, context_tokens: np.ndarray,
                            current_sum: np.ndarray
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Attention over one context utterance's token vectors (N_c, d),
    conditioned on the current utterance's token-vector sum (d,).

    Returns (alpha, pooled): the distribution over tokens and their
    alpha-weighted sum.
    """
    tokens = np.asarray(context_tokens, dtype=np.float64)
    with T.no_grad():
        cond = T.matmul(np.asarray(current_sum)[None, :], store["att_ctx.Wcur"])
        hidden = T.tanh(
            T.add(T.add(T.matmul(tokens, store["att_ctx.W"]), cond),
                  store["att_ctx.b"])
        )
        alpha = T.masked_softmax(T.dot_last(hidden, store["att_ctx.u"]))
        pooled = T.sum_(T.mul(T.reshape(alpha, (-1, 1)), tokens), axis=0)
    return alpha.data.copy(), pooled.data.copy()


def time_decay_weights(store: ParamStore, side: str, offsets) -> np.ndarray:
    """Normalized time-decay weights for integer offsets >= 1."""
    off = np.asarray(offsets, dtype=np.float64)[None, :]
    if off.size and off.min() < 1:
        raise ConfigurationError("time-decay offsets must be >= 1")
    with T.no_grad():
        w = _decay_weights_t(store, side, off, np.ones_like(off))
    return w.data[0].copy()


def attention_details(store: ParamStore, features, t: int,
                      cfg: EncoderConfig) -> dict:
    """All three attention distributions for one utterance, as plain
    lists (for the dump-attention CLI flag).

    alpha: per in-window context utterance, over its tokens; beta: per
    side over offsets; gamma: over [pre, tokens..., post].
    """
    batch = build_batch([(features, t)], cfg)
    collected: dict = {}
    with T.no_grad():
        _forward(store, batch, cfg, None, False, 0.0, collect=collected)
    out: dict = {"t": t, "gamma": collected["gamma"][0].tolist()}
    for side in ("pre", "post"):
        alpha = collected[f"alpha_{side}"][0]
        beta = collected[f"beta_{side}"][0]
        slots = (batch.pre_slot_mask if side == "pre" else batch.post_slot_mask)[0]
        toks = (batch.pre_tok_mask if side == "pre" else batch.post_tok_mask)[0]
        entries = []
        for j, live in enumerate(slots):
            if not live:
                continue
            n_real = int(toks[j].sum())
            entries.append(
                {
                    "offset": j + 1,
                    "alpha": alpha[j, :n_real].tolist(),
                    "beta": float(beta[j]),
                }
            )
        out[side] = entries
    return out
