"""LNKR checkpoint files.

Layout: magic "LNKR", version u32, record count u32, then per record:
name length u16 + utf-8 name, dtype code u8 (0=f64, 1=f32), ndim u8,
ndim x u32 dims, raw little-endian values. Round-trips bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"LNKR"
VERSION = 1

_DTYPES = {0: "<f8", 1: "<f4"}
_CODES = {np.dtype(np.float64): 0, np.dtype(np.float32): 1}


def save_checkpoint(path, records):
    """records: ordered iterable of (name, ndarray)."""
    records = list(records)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(records)))
        for name, arr in records:
            arr = np.asarray(arr)
            code = _CODES[arr.dtype]
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", code, arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def load_checkpoint(path):
    """Returns an insertion-ordered dict name -> ndarray."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a LNKR checkpoint")
    try:
        version, count = struct.unpack_from("<II", blob, 4)
        if version != VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        off = 12
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off:off + nlen].decode("utf-8")
            off += nlen
            code, ndim = struct.unpack_from("<BB", blob, off)
            off += 2
            dims = struct.unpack_from(f"<{ndim}I", blob, off) if ndim else ()
            off += 4 * ndim
            if code not in _DTYPES:
                raise FormatError(f"{path}: unknown dtype code {code}")
            dt = np.dtype(_DTYPES[code])
            n = int(np.prod(dims)) if dims else 1
            arr = np.frombuffer(blob, dtype=dt, count=n, offset=off).reshape(dims)
            off += n * dt.itemsize
            out[name] = arr.copy()
        return out
    except struct.error as exc:
        raise FormatError(f"{path}: truncated checkpoint ({exc})") from exc
