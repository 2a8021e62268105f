"""Canonical binary encodings for arrays plus the hex watermark format.

Layout of an array record (all integers little-endian):

    magic   4 bytes  b"FMAR"
    version u16      currently 1
    kind    u8       ord('M') float64 matrix | ord('V') float64 vector |
                     ord('B') bit vector
    ndim    u8
    dims    u64 * ndim
    payload          float64 LE values, or one byte per bit for kind 'B'

Round trips are bit-exact: float payloads are written from the raw IEEE-754
representation, never through text.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .core import as_bits

MAGIC = b"FMAR"
VERSION = 1

_KIND_MATRIX = ord("M")
_KIND_VECTOR = ord("V")
_KIND_BITS = ord("B")


def _pack(kind: int, arr: np.ndarray, payload: bytes) -> bytes:
    header = MAGIC + struct.pack("<HBB", VERSION, kind, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + dims + payload


def dumps_matrix(matrix: np.ndarray) -> bytes:
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"matrix must be 2-d, got {matrix.ndim}-d")
    return _pack(_KIND_MATRIX, matrix, matrix.astype("<f8").tobytes())


def dumps_vector(vector: np.ndarray) -> bytes:
    vector = np.ascontiguousarray(vector, dtype=np.float64)
    if vector.ndim != 1:
        raise ValueError(f"vector must be 1-d, got {vector.ndim}-d")
    return _pack(_KIND_VECTOR, vector, vector.astype("<f8").tobytes())


def dumps_bits(bits: np.ndarray) -> bytes:
    bits = as_bits(bits)
    return _pack(_KIND_BITS, bits, bits.tobytes())


def loads_array(data: bytes) -> np.ndarray:
    """Decode any array record; the kind determines dtype and rank."""
    arr, consumed = read_array(data, 0)
    if consumed != len(data):
        raise ValueError(f"trailing bytes after array record: {len(data) - consumed}")
    return arr


def read_array(data: bytes, offset: int) -> tuple[np.ndarray, int]:
    """Decode one array record starting at offset; returns (array, next offset)."""
    if data[offset : offset + 4] != MAGIC:
        raise ValueError("bad magic: not an array record")
    version, kind, ndim = struct.unpack_from("<HBB", data, offset + 4)
    if version != VERSION:
        raise ValueError(f"unsupported array record version {version}")
    pos = offset + 8
    dims = struct.unpack_from(f"<{ndim}Q", data, pos)
    pos += 8 * ndim
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    if kind in (_KIND_MATRIX, _KIND_VECTOR):
        expected_ndim = 2 if kind == _KIND_MATRIX else 1
        if ndim != expected_ndim:
            raise ValueError(f"kind {chr(kind)} record has rank {ndim}")
        nbytes = 8 * count
        arr = np.frombuffer(data[pos : pos + nbytes], dtype="<f8").reshape(dims)
        return arr.astype(np.float64), pos + nbytes
    if kind == _KIND_BITS:
        if ndim != 1:
            raise ValueError(f"bit record has rank {ndim}")
        raw = np.frombuffer(data[pos : pos + count], dtype=np.uint8)
        return as_bits(raw), pos + count
    raise ValueError(f"unknown array kind byte {kind}")


def bits_to_hex(bits: np.ndarray) -> str:
    """Lowercase hex, two chars per byte, MSB-first within each byte.

    Requires the bit count to be a multiple of 8.
    """
    bits = as_bits(bits)
    if bits.size % 8 != 0:
        raise ValueError(f"hex encoding needs a multiple of 8 bits, got {bits.size}")
    return np.packbits(bits, bitorder="big").tobytes().hex()


def hex_to_bits(text: str, expected_len: int | None = None) -> np.ndarray:
    raw = bytes.fromhex(text.strip())
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="big")
    if expected_len is not None and bits.size != expected_len:
        raise ValueError(f"expected {expected_len} bits, got {bits.size}")
    return bits.astype(np.uint8)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def commitment_of_bits(bits: np.ndarray) -> str:
    """Hash of the canonical bit-vector serialization; binds a watermark
    without revealing it."""
    return sha256_hex(dumps_bits(bits))
