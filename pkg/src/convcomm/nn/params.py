"""Named parameter store with deterministic iteration order."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .tensor import Tensor


class ParamStore:
    """Ordered map parameter-name -> leaf Tensor.

    Each parameter owns one gradient slot (``Tensor.grad``); iteration
    follows insertion order, which makes optimizer updates, checkpoints
    and gradient checks reproducible.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ConfigurationError(f"duplicate parameter '{name}'")
        t = Tensor(np.array(data, dtype=np.float64))
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._params[name]
        except KeyError:
            raise KeyError(f"unknown parameter '{name}'") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self):
        return iter(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def n_entries(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Replace parameter values in place; names and shapes must match."""
        missing = set(self._params) - set(arrays)
        if missing:
            raise ConfigurationError(f"missing parameters: {sorted(missing)}")
        for name, t in self._params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ConfigurationError(
                    f"parameter '{name}': stored shape {arr.shape} "
                    f"!= expected {t.data.shape}"
                )
            t.data = arr.copy()
            t.grad = None


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
