"""GAF archive: binary container for encoded image sets.

Layout (little-endian)::

    magic     4 bytes  b"GAF1"
    version   u32
    count     u32
    n         u32      image side length
    map_len   u32, then map_len bytes of ASCII label map, e.g. "Z=0,O=1,N=2,F=3,S=4"
    payload   count x (label u8 + n*n float32, row-major)
    trailer   count x (id_len u16, record id UTF-8, offset u32)

The payload section is exactly count * (1 + 4 n^2) bytes. The trailer keeps
window provenance (source record and start sample) for rendering.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dataset import ClassLabel
from .errors import IncompatibleCheckpoint, ReadError, WriteError
from .pipeline import EncodedSet

MAGIC = b"GAF1"
VERSION = 1
LABEL_MAP = ",".join(f"{label.name}={int(label)}" for label in ClassLabel)


def dumps(data: EncodedSet) -> bytes:
    count = len(data)
    n = data.image_size
    if count and data.images.shape[1:] != (n, n):
        raise ValueError("archive images must be square")
    if np.any((data.labels < 0) | (data.labels > 4)):
        raise ValueError("labels must be in 0-4")
    label_map = LABEL_MAP.encode("ascii")
    header = MAGIC + struct.pack("<IIII", VERSION, count, n, len(label_map)) + label_map
    record = np.dtype([("label", "u1"), ("pixels", "<f4", (n * n,))])
    payload = np.empty(count, dtype=record)
    payload["label"] = data.labels
    payload["pixels"] = np.asarray(data.images, dtype="<f4").reshape(count, n * n)
    trailer = []
    for rid, off in zip(data.record_ids, data.offsets):
        raw = rid.encode("utf-8")
        trailer.append(struct.pack("<H", len(raw)) + raw + struct.pack("<I", int(off)))
    return header + payload.tobytes() + b"".join(trailer)


def loads(blob: bytes, source: str = "<bytes>") -> EncodedSet:
    try:
        if blob[:4] != MAGIC:
            raise ReadError(source, "not a GAF archive")
        version, count, n, mlen = struct.unpack_from("<IIII", blob, 4)
        if version != VERSION:
            raise ReadError(source, f"unsupported archive version {version}")
        pos = 20
        label_map = blob[pos : pos + mlen].decode("ascii")
        pos += mlen
        if label_map != LABEL_MAP:
            raise IncompatibleCheckpoint(f"{source}: unexpected label map {label_map!r}")
        record = np.dtype([("label", "u1"), ("pixels", "<f4", (n * n,))])
        size = count * record.itemsize
        if len(blob) < pos + size:
            raise ReadError(source, "truncated archive payload")
        payload = np.frombuffer(blob, dtype=record, count=count, offset=pos)
        pos += size
        ids, offsets = [], []
        for _ in range(count):
            (ilen,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            ids.append(blob[pos : pos + ilen].decode("utf-8"))
            pos += ilen
            offsets.append(struct.unpack_from("<I", blob, pos)[0])
            pos += 4
    except struct.error:
        raise ReadError(source, "truncated archive") from None
    labels = payload["label"].astype(np.int64)
    if np.any(labels > 4):
        raise ReadError(source, "label byte out of range")
    images = payload["pixels"].reshape(count, n, n).astype(np.float32)
    return EncodedSet(images, labels, ids, np.array(offsets, dtype=np.int64))


def write(path, data: EncodedSet) -> None:
    path = Path(path)
    try:
        path.write_bytes(dumps(data))
    except OSError as exc:
        raise WriteError(path, exc.strerror or "cannot write") from exc


def read(path) -> EncodedSet:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ReadError(path, exc.strerror or "cannot read") from exc
    return loads(blob, str(path))
