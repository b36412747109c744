"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .params import ParamStore
from .tensor import Tensor, backward, no_grad


def _eval_scalar(loss_fn: Callable[[], Tensor]) -> float:
    with no_grad():
        out = loss_fn()
    return out.item() if isinstance(out, Tensor) else float(out)


def grad_check(loss_fn: Callable[[], Tensor], store: ParamStore,
               eps: float = 1e-5,
               param_names: Iterable[str] | None = None) -> dict[str, float]:
    """Compare analytic gradients against central differences.

    ``loss_fn`` evaluates a scalar loss from the store's current values
    and must be deterministic (two initial evaluations are compared).
    Every entry of every checked parameter is perturbed by +/- eps; the
    worst relative error per parameter is returned, with denominator
    ``max(|analytic|, |numeric|, 1e-8)``.
    """
    if _eval_scalar(loss_fn) != _eval_scalar(loss_fn):
        raise ValueError("grad_check: loss closure is not deterministic")

    store.zero_grad()
    out = loss_fn()
    if not isinstance(out, Tensor):
        raise ValueError("grad_check: loss closure must return a Tensor")
    backward(out)
    names = list(param_names) if param_names is not None else store.names()
    analytic = {}
    for name in names:
        g = store[name].grad
        analytic[name] = (
            g.copy() if g is not None else np.zeros_like(store[name].data)
        )
    store.zero_grad()

    worst: dict[str, float] = {}
    for name in names:
        flat = store[name].data.reshape(-1)
        ana = analytic[name].reshape(-1)
        err = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = _eval_scalar(loss_fn)
            flat[i] = orig - eps
            f_minus = _eval_scalar(loss_fn)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(ana[i]), abs(numeric), 1e-8)
            err = max(err, abs(ana[i] - numeric) / denom)
        worst[name] = err
    return worst
