"""Watermark extraction from suspect models and BER-based verification."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .core import ber, delta
from .data import TriggerSet
from .errors import IncompatibleArchitectureError, TriggerDigestMismatchError
from .keygen import SecretKeyPair
from .model import ModelCheckpoint, mean_activation
from .serialize import bits_to_hex

VERDICT_COPY = "copy"
VERDICT_NOT_COPY = "not-copy"


@dataclass
class BerReport:
    """Outcome of comparing an extracted watermark against the original."""

    extracted: np.ndarray
    ber: float
    theta: float
    verdict: str
    suspect_fingerprint: str = ""
    key_id: str = ""

    @property
    def is_copy(self) -> bool:
        return self.verdict == VERDICT_COPY

    def _extracted_repr(self) -> str:
        if self.extracted.size % 8 == 0:
            return bits_to_hex(self.extracted)
        return "".join(str(int(b)) for b in self.extracted)

    def to_dict(self) -> dict:
        return {
            "ber": self.ber,
            "theta": self.theta,
            "verdict": self.verdict,
            "n_bits": int(self.extracted.size),
            "extracted": self._extracted_repr(),
            "suspect_fingerprint": self.suspect_fingerprint,
            "key_id": self.key_id,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def to_text(self) -> str:
        lines = [
            f"key-id: {self.key_id}",
            f"suspect-fingerprint: {self.suspect_fingerprint}",
            f"bits: {self.extracted.size}",
            f"ber: {self.ber}",
            f"theta: {self.theta}",
            f"verdict: {self.verdict}",
        ]
        return "\n".join(lines)


def extract(
    suspect: ModelCheckpoint,
    trigger: TriggerSet,
    keys: SecretKeyPair,
    allow_digest_mismatch: bool = False,
) -> np.ndarray:
    """Extracted watermark delta(A (alpha * fhat - d)) from the suspect's
    mean activation at the key's target layer.

    Refuses suspects whose target layer is missing or has the wrong width;
    no truncation or padding is ever attempted.
    """
    hidden = suspect.spec.hidden
    if not 0 <= keys.layer_index < len(hidden):
        raise IncompatibleArchitectureError(
            f"suspect has {len(hidden)} hidden layers, keys target layer {keys.layer_index}"
        )
    if hidden[keys.layer_index] != keys.width:
        raise IncompatibleArchitectureError(
            f"layer {keys.layer_index} has width {hidden[keys.layer_index]}, "
            f"keys expect {keys.width}"
        )
    if trigger.digest != keys.trigger_digest:
        if not allow_digest_mismatch:
            raise TriggerDigestMismatchError(
                "trigger set does not match the digest stored with the keys"
            )
        warnings.warn("extracting with an overridden trigger set", stacklevel=2)
    fhat = mean_activation(suspect, trigger, keys.layer_index)
    return delta(keys.matrix @ (keys.alpha * fhat.values - keys.shift))


def verify(
    watermark_bits: np.ndarray,
    extracted: np.ndarray,
    theta: float,
    suspect_fingerprint: str = "",
    key_id: str = "",
) -> BerReport:
    """BER between the owner's watermark and the extracted bits; verdict is
    copy exactly when ber <= theta (boundary counts as copy)."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must be in [0, 1], got {theta}")
    rate = ber(watermark_bits, extracted)
    verdict = VERDICT_COPY if rate <= theta else VERDICT_NOT_COPY
    return BerReport(
        extracted=np.asarray(extracted, dtype=np.uint8),
        ber=rate,
        theta=theta,
        verdict=verdict,
        suspect_fingerprint=suspect_fingerprint,
        key_id=key_id,
    )
