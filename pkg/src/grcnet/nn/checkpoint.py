"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    magic        8 bytes  b"GRCNCKPT"
    version      u32
    config_len   u32, then config_len bytes of UTF-8 ``key = value`` text
    n_arrays     u32
    per array:   name_len u16, name (UTF-8), ndim u8, ndim x u32 dims,
                 prod(dims) x float64 values, row-major

Arrays appear in the model's declaration order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .. import kv
from ..errors import IncompatibleCheckpoint, ReadError, WriteError
from .model import GRCNet, ModelConfig

MAGIC = b"GRCNCKPT"
VERSION = 1


def dumps(model: GRCNet) -> bytes:
    config = "\n".join(kv.to_lines(model.cfg)).encode("utf-8")
    params = list(model.named_parameters())
    chunks = [MAGIC, struct.pack("<II", VERSION, len(config)), config, struct.pack("<I", len(params))]
    for name, arr in params:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


def loads(blob: bytes, dtype=np.float64) -> GRCNet:
    try:
        if blob[:8] != MAGIC:
            raise IncompatibleCheckpoint("not a checkpoint (bad magic)")
        version, clen = struct.unpack_from("<II", blob, 8)
        if version != VERSION:
            raise IncompatibleCheckpoint(f"unsupported checkpoint version {version}")
        pos = 16
        text = blob[pos : pos + clen].decode("utf-8")
        pos += clen
        cfg = kv.from_mapping(ModelConfig, kv.parse_lines(text))
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            arrays[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape)
            pos += 8 * size
    except struct.error as exc:
        raise IncompatibleCheckpoint(f"truncated checkpoint: {exc}") from None
    if pos != len(blob):
        raise IncompatibleCheckpoint("trailing bytes after checkpoint payload")
    model = GRCNet(cfg, dtype=dtype)
    if list(arrays) != [n for n, _ in model.named_parameters()]:
        raise IncompatibleCheckpoint("parameter names do not match the configured model")
    model.load_parameters(arrays)
    return model


def save(path, model: GRCNet) -> None:
    path = Path(path)
    try:
        path.write_bytes(dumps(model))
    except OSError as exc:
        raise WriteError(path, exc.strerror or "cannot write") from exc


def load(path, dtype=np.float64) -> GRCNet:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ReadError(path, exc.strerror or "cannot read") from exc
    return loads(blob, dtype=dtype)
