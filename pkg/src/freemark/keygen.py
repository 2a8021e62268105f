"""Secret-key generation from a host model's activations.

The pipeline never touches the model: a watermark b and a random auxiliary
vector mu determine a matrix key A (gradient descent drives the thresholded
product delta(A @ mu) onto b with a sign margin), and the mean activation
vector folds into a shift key d = alpha * fbar - mu with alpha chosen so
that d alone cannot reproduce the watermark.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import SeededRng, delta, sample_gaussian_vector, sigmoid
from .data import TriggerSet
from .errors import AlphaSearchError, DegenerateActivationError, KeyDerivationError
from .model import ModelCheckpoint, mean_activation
from .serialize import (
    bits_to_hex,
    commitment_of_bits,
    dumps_matrix,
    dumps_vector,
    hex_to_bits,
    read_array,
    sha256_hex,
)

KEYPAIR_MAGIC = b"FMKP"
KEYPAIR_VERSION = 1

DEFAULT_WATERMARK_BITS = 512
MIN_WATERMARK_BITS = 8


@dataclass(frozen=True)
class WatermarkVector:
    """The owner's secret N-bit message."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size < MIN_WATERMARK_BITS:
            raise ValueError(f"watermark needs at least {MIN_WATERMARK_BITS} bits")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("watermark entries must be 0 or 1")
        object.__setattr__(self, "bits", bits.astype(np.uint8))

    @property
    def n_bits(self) -> int:
        return self.bits.size

    def commitment(self) -> str:
        return commitment_of_bits(self.bits)

    def to_hex(self) -> str:
        return bits_to_hex(self.bits)

    @staticmethod
    def from_hex(text: str) -> "WatermarkVector":
        return WatermarkVector(hex_to_bits(text))

    @staticmethod
    def random(n_bits: int, rng: SeededRng) -> "WatermarkVector":
        return WatermarkVector(rng.random_bits(n_bits))


@dataclass(frozen=True)
class KeyGenConfig:
    """Hyperparameters for key derivation.

    theta sits strictly inside (0, 0.5): it must be below the ~0.5 error
    rate of random extraction yet above zero for the shift-key constraint
    to bite.
    """

    lr: float = 0.005
    max_iters: int = 1000
    margin: float = 1.0
    theta: float = 0.25
    alpha_init: float = 1.0
    alpha_step: float = 0.5
    alpha_max: float = 16.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.theta < 0.5:
            raise ValueError(f"theta must lie strictly in (0, 0.5), got {self.theta}")
        if self.lr <= 0 or self.max_iters < 1 or self.margin < 0:
            raise ValueError("lr must be positive, max_iters >= 1, margin >= 0")
        if self.alpha_step <= 0 or self.alpha_max < self.alpha_init:
            raise ValueError("alpha grid is empty or stepping backwards")

    def alpha_grid(self) -> np.ndarray:
        steps = int(np.floor((self.alpha_max - self.alpha_init) / self.alpha_step + 1e-12))
        return self.alpha_init + self.alpha_step * np.arange(steps + 1)


@dataclass
class SecretKeyPair:
    """Escrow material binding a watermark to a host model's activations."""

    matrix: np.ndarray  # (N, M)
    shift: np.ndarray  # (M,)
    alpha: float
    layer_index: int
    trigger_digest: str
    watermark_commitment: str
    config: KeyGenConfig = field(default_factory=KeyGenConfig)

    @property
    def n_bits(self) -> int:
        return self.matrix.shape[0]

    @property
    def width(self) -> int:
        return self.matrix.shape[1]

    def to_bytes(self) -> bytes:
        header = {
            "version": KEYPAIR_VERSION,
            "n_bits": self.n_bits,
            "width": self.width,
            "layer_index": self.layer_index,
            "alpha": self.alpha,
            "trigger_digest": self.trigger_digest,
            "watermark_commitment": self.watermark_commitment,
            "config": asdict(self.config),
        }
        header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return b"".join(
            [
                KEYPAIR_MAGIC,
                struct.pack("<HI", KEYPAIR_VERSION, len(header_bytes)),
                header_bytes,
                dumps_matrix(self.matrix),
                dumps_vector(self.shift),
            ]
        )

    @staticmethod
    def from_bytes(data: bytes) -> "SecretKeyPair":
        if data[:4] != KEYPAIR_MAGIC:
            raise ValueError("not a key-pair record: bad magic")
        version, header_len = struct.unpack_from("<HI", data, 4)
        if version != KEYPAIR_VERSION:
            raise ValueError(f"unsupported key-pair version {version}")
        pos = 10
        header = json.loads(data[pos : pos + header_len].decode())
        pos += header_len
        matrix, pos = read_array(data, pos)
        shift, pos = read_array(data, pos)
        if pos != len(data):
            raise ValueError("trailing bytes after key-pair record")
        pair = SecretKeyPair(
            matrix=matrix,
            shift=shift,
            alpha=float(header["alpha"]),
            layer_index=int(header["layer_index"]),
            trigger_digest=header["trigger_digest"],
            watermark_commitment=header["watermark_commitment"],
            config=KeyGenConfig(**header["config"]),
        )
        if (pair.n_bits, pair.width) != (header["n_bits"], header["width"]):
            raise ValueError("key-pair header dimensions disagree with payload")
        return pair

    def key_id(self) -> str:
        return sha256_hex(self.to_bytes())


def _satisfied(pre: np.ndarray, bits: np.ndarray, margin: float) -> bool:
    return bool((delta(pre) == bits).all() and (np.abs(pre) >= margin).all())


def derive_matrix(
    bits: np.ndarray,
    mu: np.ndarray,
    cfg: KeyGenConfig,
    init_rng: SeededRng | None = None,
) -> tuple[np.ndarray, int]:
    """Gradient-descent derivation of the matrix key.

    Descends J(A) = sum_i softplus(margin - s_i (A mu)_i) with s_i = +-1 per
    watermark bit — a smooth hinge whose gradient pushes every pre-threshold
    value past the margin on the correct side — and stops as soon as
    delta(A mu) equals the watermark exactly with all |pre| >= margin.

    Returns (A, number of update steps taken).
    """
    bits = np.asarray(bits, dtype=np.uint8)
    mu = np.asarray(mu, dtype=np.float64)
    width = mu.size
    if width < MIN_WATERMARK_BITS:
        raise ValueError(f"auxiliary vector too short: {width} < {MIN_WATERMARK_BITS}")
    if not mu.any():
        raise ValueError("auxiliary vector is identically zero; no matrix can separate it")
    if init_rng is None:
        init_rng = SeededRng(cfg.seed)

    signs = bits.astype(np.float64) * 2.0 - 1.0
    # Entry scale 1/sqrt(width) keeps initial pre-threshold values ~N(0, 1).
    matrix = init_rng.normal_matrix(bits.size, width, scale=1.0 / np.sqrt(width))

    for step in range(cfg.max_iters + 1):
        pre = matrix @ mu
        if _satisfied(pre, bits, cfg.margin):
            return matrix, step
        if step == cfg.max_iters:
            mismatches = int(np.count_nonzero(delta(pre) != bits))
            raise KeyDerivationError(
                f"no exact watermark match after {cfg.max_iters} iterations "
                f"({mismatches} bits still wrong)",
                mismatches=mismatches,
                iterations=cfg.max_iters,
            )
        pull = sigmoid(cfg.margin - signs * pre) * signs
        matrix += cfg.lr * np.outer(pull, mu)

    raise AssertionError("unreachable")


def security_mismatches(matrix: np.ndarray, shift: np.ndarray, bits: np.ndarray) -> int:
    """Hamming distance between delta(A d) and the watermark."""
    return int(np.count_nonzero(delta(matrix @ shift) != np.asarray(bits, dtype=np.uint8)))


def derive_d_and_alpha(
    matrix: np.ndarray,
    mu: np.ndarray,
    fbar: np.ndarray,
    bits: np.ndarray,
    cfg: KeyGenConfig,
) -> tuple[np.ndarray, float]:
    """Shift key d = alpha * fbar - mu for the smallest grid alpha whose
    standalone extraction delta(A d) misses the watermark on >= theta * N
    bits."""
    fbar = np.asarray(fbar, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if fbar.shape != mu.shape or fbar.size != matrix.shape[1]:
        raise ValueError(
            f"shape mismatch: fbar {fbar.shape}, mu {mu.shape}, matrix {matrix.shape}"
        )
    if not fbar.any():
        raise DegenerateActivationError(
            "mean activation is identically zero: d would not depend on alpha"
        )
    bits = np.asarray(bits, dtype=np.uint8)
    floor = cfg.theta * bits.size
    for alpha in cfg.alpha_grid():
        shift = alpha * fbar - mu
        if security_mismatches(matrix, shift, bits) >= floor:
            return shift, float(alpha)
    raise AlphaSearchError(
        f"no alpha in [{cfg.alpha_init}, {cfg.alpha_max}] step {cfg.alpha_step} "
        f"puts delta(A d) at least {floor:.1f} bits away from the watermark"
    )


def generate_keys(
    model: ModelCheckpoint,
    trigger: TriggerSet,
    layer_index: int,
    watermark: WatermarkVector,
    cfg: KeyGenConfig,
) -> SecretKeyPair:
    """Full key generation on a host model; strictly read-only on the model.

    Samples mu ~ N(0, 1)^M from the config seed, reads the mean activation
    at the target layer, derives the matrix key, then the shift key and
    scaling factor.
    """
    fbar = mean_activation(model, trigger, layer_index)
    mu_rng, init_rng = SeededRng(cfg.seed).split(2)
    mu = sample_gaussian_vector(mu_rng, fbar.width)
    matrix, _ = derive_matrix(watermark.bits, mu, cfg, init_rng)
    shift, alpha = derive_d_and_alpha(matrix, mu, fbar.values, watermark.bits, cfg)
    return SecretKeyPair(
        matrix=matrix,
        shift=shift,
        alpha=alpha,
        layer_index=layer_index,
        trigger_digest=trigger.digest,
        watermark_commitment=watermark.commitment(),
        config=cfg,
    )
