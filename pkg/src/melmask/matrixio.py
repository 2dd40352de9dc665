"""Self-describing binary matrix files used by all CLI I/O.

Layout, all integers 64-bit little-endian:

    magic   4 bytes  b"MMAT"
    version u64      currently 1
    rank    u64
    dims    rank * u64
    data    row-major float64, prod(dims) values
"""

import struct

import numpy as np

from .errors import MatrixFormatError

MAGIC = b"MMAT"
VERSION = 1


def save_matrix(path, array) -> None:
    arr = np.ascontiguousarray(array, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", VERSION))
        fh.write(struct.pack("<Q", arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<Q", d))
        fh.write(arr.astype("<f8", copy=False).tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise MatrixFormatError(f"{path}: not a matrix file (bad magic)")
    off = 4

    def read_u64():
        nonlocal off
        if off + 8 > len(raw):
            raise MatrixFormatError(f"{path}: truncated header")
        (v,) = struct.unpack_from("<Q", raw, off)
        off += 8
        return v

    version = read_u64()
    if version != VERSION:
        raise MatrixFormatError(f"{path}: unsupported version {version}")
    rank = read_u64()
    if rank > 32:
        raise MatrixFormatError(f"{path}: implausible rank {rank}")
    dims = tuple(read_u64() for _ in range(rank))
    count = 1
    for d in dims:
        count *= d
    need = off + 8 * count
    if len(raw) < need:
        raise MatrixFormatError(f"{path}: truncated data ({len(raw)} bytes, expected {need})")
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    return data.reshape(dims).copy()
