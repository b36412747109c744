"""Dense layer, softmax and dropout on top of the autodiff tape."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from . import tensor as T
from .tensor import Tensor

_ACTIVATIONS = {"linear": None, "tanh": T.tanh, "relu": T.relu}


def dense(x, W, b, activation: str = "linear") -> Tensor:
    """Affine map plus optional nonlinearity: ``act(x @ W + b)``.

    ``x`` is (..., in), ``W`` is (in, out), ``b`` is (out,).
    """
    xd, Wd, bd = T._data(x), T._data(W), T._data(b)
    if xd.ndim < 2 or Wd.ndim != 2 or xd.shape[-1] != Wd.shape[0]:
        raise ConfigurationError(
            f"dense: incompatible shapes x{xd.shape} W{Wd.shape}"
        )
    if bd.shape != (Wd.shape[1],):
        raise ConfigurationError(
            f"dense: bias shape {bd.shape} does not match output dim {Wd.shape[1]}"
        )
    try:
        act = _ACTIVATIONS[activation]
    except KeyError:
        raise ConfigurationError(f"dense: unknown activation '{activation}'") from None
    y = T.add(T.matmul(x, W), b)
    return act(y) if act is not None else y


def softmax(x, mask=None) -> Tensor:
    """Numerically stable softmax over the last axis; masked entries get 0.

    Raises ``ValueError("empty attention support")`` when some row has
    no unmasked entry.
    """
    return T.masked_softmax(x, mask=mask, allow_empty=False)


def dropout(x, rate: float, rng: np.random.Generator | None = None,
            training: bool = False) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors.

    Identity when not training or when ``rate`` is 0.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return T.as_tensor(x)
    if rng is None:
        raise ConfigurationError("dropout in training mode requires an rng")
    keep = (rng.random(T._data(x).shape) >= rate) / (1.0 - rate)
    return T.mul(x, keep)
