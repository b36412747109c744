"""Binary parameter checkpoints.

Layout: an 8-byte magic, a little-endian uint32 header length, a JSON
header (config hash, epoch, free-form extras, and the ordered list of
parameter names and shapes), then each array's raw float64
little-endian bytes in header order. Round-trips are bit exact.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .params import ParamStore

_MAGIC = b"CCCKPT01"


def save_checkpoint(store: ParamStore, path, config_hash: str, epoch: int,
                    extras: dict | None = None,
                    extra_arrays: dict[str, np.ndarray] | None = None) -> None:
    """Write parameters (plus optional non-trainable arrays) to ``path``."""
    extra_arrays = extra_arrays or {}
    entries = [(name, t.data) for name, t in store.items()]
    entries += [(f"extra:{k}", np.asarray(v, dtype=np.float64))
                for k, v in sorted(extra_arrays.items())]
    header = {
        "format": 1,
        "config_hash": config_hash,
        "epoch": epoch,
        "extras": extras or {},
        "params": [{"name": n, "shape": list(a.shape)} for n, a in entries],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, arr in entries:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint: (params dict, header dict, extra arrays dict)."""
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ConfigurationError(f"{path}: not a parameter checkpoint")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        params: dict[str, np.ndarray] = {}
        extra: dict[str, np.ndarray] = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 8)
            if len(raw) != count * 8:
                raise ConfigurationError(f"{path}: truncated checkpoint")
            arr = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
            name = entry["name"]
            if name.startswith("extra:"):
                extra[name[len("extra:"):]] = arr
            else:
                params[name] = arr
    return params, header, extra
