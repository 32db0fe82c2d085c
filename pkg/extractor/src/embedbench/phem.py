"""Writer/reader for the binary embedding file format (PHEM).

Layout: magic "PHEM", format version u16 LE = 1, count u32 LE, dim u32
LE, count x dim float32 LE row-major, then (optionally) count
null-terminated UTF-8 id strings.  This is the cross-component contract:
files written here must parse bit-identically in the registry tooling.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"PHEM"
VERSION = 1


def write_phem(path, embeddings: np.ndarray, ids: list[str] | None = None) -> None:
    x = np.ascontiguousarray(np.asarray(embeddings, dtype=np.float32))
    if x.ndim != 2:
        raise ValueError("expected a 2-D embedding matrix")
    count, dim = x.shape
    if ids is not None and len(ids) != count:
        raise ValueError(f"{len(ids)} ids for {count} embeddings")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HII", VERSION, count, dim))
        f.write(x.astype("<f4").tobytes())
        if ids is not None:
            for s in ids:
                f.write(s.encode("utf-8") + b"\x00")


def read_phem(path) -> tuple[np.ndarray, list[str] | None]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise IOError(f"bad magic {magic!r}")
        version, count, dim = struct.unpack("<HII", f.read(10))
        if version != VERSION:
            raise IOError(f"unsupported version {version}")
        raw = f.read(4 * count * dim)
        if len(raw) != 4 * count * dim:
            raise IOError("truncated embedding file")
        x = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
        trailer = f.read()
    ids = None
    if trailer:
        parts = trailer.split(b"\x00")
        if len(parts) != count + 1 or parts[-1] != b"":
            raise IOError("malformed id trailer")
        ids = [p.decode("utf-8") for p in parts[:-1]]
    return x.copy(), ids
