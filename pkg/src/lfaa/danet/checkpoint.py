"""Binary parameter checkpoints.

Layout, all little endian::

    b"DA2N"  uint32 version  uint32 count
    count x { uint16 name_len, name (utf-8), uint8 ndim, ndim x uint32 dims }
    raw float32 tensors in table order

The network configuration travels as three extra tensors named
``meta.alpha_s``, ``meta.shears`` and ``meta.width_scale``. Normalization
running statistics are stored as ``<layer>.running_mean`` and
``<layer>.running_var``.
"""
from __future__ import annotations

import struct
from typing import Dict, List, Tuple

import numpy as np

from .graph import build_da2n
from .model import NetworkParams, init_params

MAGIC = b"DA2N"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint."""


def _entries(params: NetworkParams) -> List[Tuple[str, np.ndarray]]:
    out = [("meta.alpha_s", np.array([params.alpha_s])),
           ("meta.shears", np.asarray(params.shears)),
           ("meta.width_scale", np.array([params.width_scale]))]
    for key, d in params.tensors.items():
        for n, t in d.items():
            out.append((f"{key}.{n}", t))
    for key, d in params.state.items():
        out.append((f"{key}.running_mean", d["mean"]))
        out.append((f"{key}.running_var", d["var"]))
    return out


def save_checkpoint(params: NetworkParams, path) -> None:
    entries = _entries(params)
    head = [MAGIC, struct.pack("<II", VERSION, len(entries))]
    for name, t in entries:
        b = name.encode("utf-8")
        head.append(struct.pack("<H", len(b)) + b + struct.pack("<B", t.ndim))
        head.append(struct.pack(f"<{t.ndim}I", *t.shape))
    with open(path, "wb") as fh:
        fh.write(b"".join(head))
        for _, t in entries:
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def _read_table(buf):
    if buf[:4] != MAGIC:
        raise CheckpointError("not a DA2N checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    table = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = bytes(buf[pos:pos + nlen]).decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        table.append((name, tuple(shape)))
    return table, pos


def load_checkpoint(path, dtype=np.float64) -> NetworkParams:
    with open(path, "rb") as fh:
        buf = fh.read()
    try:
        table, pos = _read_table(buf)
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint header: {exc}") from exc
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in table:
        n = int(np.prod(shape, dtype=np.int64))
        if pos + 4 * n > len(buf):
            raise CheckpointError(f"truncated data for tensor {name}")
        arrays[name] = np.frombuffer(buf, dtype="<f4", count=n, offset=pos).reshape(shape).astype(dtype)
        pos += 4 * n
    if pos != len(buf):
        raise CheckpointError("trailing bytes after the last tensor")
    try:
        alpha_s = int(round(float(arrays.pop("meta.alpha_s")[0])))
        shears = [_exact(a) for a in arrays.pop("meta.shears")]
        width_scale = _exact(arrays.pop("meta.width_scale")[0])
    except KeyError as exc:
        raise CheckpointError(f"missing configuration tensor {exc}") from exc
    params = _skeleton(alpha_s, shears, width_scale, dtype)
    for key, d in params.tensors.items():
        for n, t in d.items():
            a = arrays.pop(f"{key}.{n}", None)
            if a is None or a.shape != t.shape:
                raise CheckpointError(f"tensor {key}.{n} missing or misshapen")
            d[n] = a
    for key, d in params.state.items():
        d["mean"] = arrays.pop(f"{key}.running_mean", d["mean"])
        d["var"] = arrays.pop(f"{key}.running_var", d["var"])
    if arrays:
        raise CheckpointError(f"unexpected tensors {sorted(arrays)}")
    return params


def _exact(v) -> float:
    # configuration values went through float32; the shortest float32 repr recovers 0.1 rather than 0.10000000149
    return float(str(np.float32(v)))


def _skeleton(alpha_s, shears, width_scale, dtype):
    return init_params(build_da2n(alpha_s, shears, width_scale), seed=0, dtype=dtype)
