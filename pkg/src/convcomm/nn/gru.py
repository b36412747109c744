"""Bidirectional gated recurrent unit built from tape primitives.

Gating follows the original formulation: update gate z controls how
much of the previous hidden state is kept, reset gate r modulates the
candidate state:

    z_t = sigmoid(x_t Wz + h_{t-1} Uz + bz)
    r_t = sigmoid(x_t Wr + h_{t-1} Ur + br)
    c_t = tanh(x_t Wh + (r_t * h_{t-1}) Uh + bh)
    h_t = z_t * h_{t-1} + (1 - z_t) * c_t

Masked steps carry the hidden state through unchanged, so annotations
at real positions are exactly what an unpadded run would produce.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from . import tensor as T
from .params import ParamStore, glorot_uniform
from .tensor import Tensor

_GATES = ("z", "r", "h")


def init_gru_params(store: ParamStore, prefix: str, in_dim: int, hidden: int,
                    rng: np.random.Generator) -> None:
    """Add one GRU direction's weights under ``prefix`` (Wz/Uz/bz, ...)."""
    for gate in _GATES:
        store.add(f"{prefix}.W{gate}", glorot_uniform(rng, (in_dim, hidden)))
        store.add(f"{prefix}.U{gate}", glorot_uniform(rng, (hidden, hidden)))
        store.add(f"{prefix}.b{gate}", np.zeros(hidden))


def gru_sequence(x, mask: np.ndarray | None, store: ParamStore, prefix: str,
                 reverse: bool = False) -> Tensor:
    """Run one GRU direction over ``x`` (B, L, in) -> (B, L, hidden).

    ``mask`` is (B, L) with 1.0 at real positions; masked steps keep the
    previous hidden state. ``reverse`` processes the sequence right to
    left (outputs stay aligned with input positions).
    """
    xd = T._data(x)
    B, L, _ = xd.shape
    Wz, Uz, bz = store[f"{prefix}.Wz"], store[f"{prefix}.Uz"], store[f"{prefix}.bz"]
    Wr, Ur, br = store[f"{prefix}.Wr"], store[f"{prefix}.Ur"], store[f"{prefix}.br"]
    Wh, Uh, bh = store[f"{prefix}.Wh"], store[f"{prefix}.Uh"], store[f"{prefix}.bh"]
    hidden = Uz.data.shape[0]

    # input projections for all steps at once
    xz = T.add(T.matmul(x, Wz), bz)
    xr = T.add(T.matmul(x, Wr), br)
    xh = T.add(T.matmul(x, Wh), bh)

    h = Tensor(np.zeros((B, hidden)))
    outs: list[Tensor | None] = [None] * L
    order = range(L - 1, -1, -1) if reverse else range(L)
    for t in order:
        z = T.sigmoid(T.add(xz[:, t, :], T.matmul(h, Uz)))
        r = T.sigmoid(T.add(xr[:, t, :], T.matmul(h, Ur)))
        c = T.tanh(T.add(xh[:, t, :], T.matmul(T.mul(r, h), Uh)))
        h_new = T.add(T.mul(z, h), T.mul(T.sub(1.0, z), c))
        if mask is None:
            h = h_new
        else:
            mt = mask[:, t : t + 1].astype(np.float64)
            if mt.all():
                h = h_new
            else:
                h = T.add(T.mul(h_new, mt), T.mul(h, 1.0 - mt))
        outs[t] = h
    stacked = [T.reshape(o, (B, 1, hidden)) for o in outs]
    return T.concat(stacked, axis=1)


def bigru(seq, store: ParamStore, fw_prefix: str = "gru.fw",
          bw_prefix: str = "gru.bw") -> Tensor:
    """Bidirectional GRU over a single sequence (L, d) -> (L, 2*hidden).

    Concatenates the left-to-right and right-to-left hidden states per
    position.
    """
    sd = T._data(seq)
    if sd.ndim != 2:
        raise ConfigurationError(f"bigru expects a (L, d) sequence, got {sd.shape}")
    if sd.shape[0] < 1:
        raise ConfigurationError("bigru requires a non-empty sequence")
    x = T.reshape(seq, (1,) + sd.shape) if isinstance(seq, Tensor) else sd[None]
    fw = gru_sequence(x, None, store, fw_prefix, reverse=False)
    bw = gru_sequence(x, None, store, bw_prefix, reverse=True)
    both = T.concat([fw, bw], axis=2)
    L = sd.shape[0]
    hidden2 = both.data.shape[2]
    return T.reshape(both, (L, hidden2))
