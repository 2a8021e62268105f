"""Deterministic numeric primitives: the thresholded logistic nonlinearity,
dense products, bit-error rate, and seeded sampling.

All public operations take and return float64 / uint8 numpy arrays and are
pure; nothing here mutates its inputs.  The random source is a thin wrapper
over PCG64 with Gaussian variates produced by an explicit Box-Muller
transform of uniform pairs, so the sample stream is a fixed function of the
seed regardless of platform or numpy release.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import DimensionMismatchError

# Identifies the exact sampling pipeline (bit generator + variate transform).
# Serialized artifacts carry this so replays can refuse a mismatched stream.
RNG_ALGORITHM_ID = "pcg64/box-muller/v1"


class SeededRng:
    """Single-owner deterministic random source.

    Not safe to share between concurrent tasks; use :meth:`split` to derive
    independent child streams instead.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.algorithm_id = RNG_ALGORITHM_ID
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed})"

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1)."""
        return self._gen.random(int(n))

    def standard_normal(self, n: int) -> np.ndarray:
        """n i.i.d. N(0,1) samples via Box-Muller on uniform pairs."""
        n = int(n)
        if n <= 0:
            raise ValueError(f"sample length must be positive, got {n}")
        pairs = (n + 1) // 2
        u1 = self._gen.random(pairs)
        u2 = self._gen.random(pairs)
        # 1 - u1 is in (0, 1], keeping the log finite.
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:n]

    def normal_matrix(self, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
        """rows x cols matrix of i.i.d. N(0, scale^2) entries."""
        flat = self.standard_normal(int(rows) * int(cols))
        return (scale * flat).reshape(int(rows), int(cols))

    def random_bits(self, n: int) -> np.ndarray:
        """n fair bits as uint8."""
        return (self._gen.random(int(n)) < 0.5).astype(np.uint8)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(int(n))

    def choice_without_replacement(self, pool: np.ndarray, k: int) -> np.ndarray:
        if k > pool.size:
            raise ValueError(f"cannot draw {k} items from a pool of {pool.size}")
        idx = self._gen.permutation(pool.size)[:k]
        return pool[idx]

    def split(self, n: int) -> list["SeededRng"]:
        """n independent child streams with seeds derived by hashing.

        The parent remains usable; children never collide with it or with
        each other for distinct (seed, index).
        """
        return [SeededRng(derive_seed(self.seed, "split", i)) for i in range(int(n))]


def derive_seed(base: int, label: str, index: int = 0) -> int:
    """Stable 63-bit child seed from (base seed, purpose label, index)."""
    material = f"{base}:{label}:{index}".encode()
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def sigmoid(x):
    """Logistic function 1/(1+e^-x), overflow-safe on both tails.

    Accepts scalars or arrays; |x| up to ~700 stays finite because the
    exponential is only ever taken of -|x|.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    if out.ndim == 0:
        return float(out)
    return out


def delta(x):
    """Thresholded logistic: 1 where sigmoid(x) >= 0.5, i.e. where x >= 0.

    Scalar in, int out; array in, uint8 bit array out.  The boundary x = 0
    (sigmoid exactly 0.5) maps to 1.
    """
    x = np.asarray(x, dtype=np.float64)
    bits = (x >= 0.0).astype(np.uint8)
    if bits.ndim == 0:
        return int(bits)
    return bits


def matvec(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """Dense matrix-vector product with an explicit shape check."""
    matrix = np.asarray(matrix, dtype=np.float64)
    vector = np.asarray(vector, dtype=np.float64)
    if matrix.ndim != 2 or vector.ndim != 1:
        raise DimensionMismatchError(
            f"expected 2-d matrix and 1-d vector, got {matrix.ndim}-d and {vector.ndim}-d"
        )
    if matrix.shape[1] != vector.shape[0]:
        raise DimensionMismatchError(
            f"matrix has {matrix.shape[1]} columns but vector has length {vector.shape[0]}"
        )
    return matrix @ vector


def as_bits(values) -> np.ndarray:
    """Validate and return a uint8 array with entries in {0, 1}."""
    bits = np.asarray(values)
    if bits.ndim != 1:
        raise ValueError(f"bit vector must be 1-d, got {bits.ndim}-d")
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("bit vector entries must be 0 or 1")
    return bits.astype(np.uint8)


def ber(b: np.ndarray, bhat: np.ndarray) -> float:
    """Bit-error rate: fraction of positions where the two bit vectors differ."""
    b = as_bits(b)
    bhat = as_bits(bhat)
    if b.size != bhat.size:
        raise DimensionMismatchError(
            f"bit vectors differ in length: {b.size} vs {bhat.size}"
        )
    if b.size == 0:
        raise ValueError("bit-error rate is undefined for empty vectors")
    return float(np.count_nonzero(b != bhat)) / b.size


def sample_gaussian_vector(rng: SeededRng, length: int) -> np.ndarray:
    """Length i.i.d. standard-normal entries from the seeded stream."""
    if length <= 0:
        raise ValueError(f"vector length must be positive, got {length}")
    return rng.standard_normal(length)


def require_finite(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr
