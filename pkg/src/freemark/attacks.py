"""Watermark-removal and false-claim attacks: magnitude pruning, forged
keys, independently trained unmarked models, and the overwriting scenario.

Fine-tuning reuses the training engine directly (`model.fine_tune`); the
helpers here only standardize its attack defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import SeededRng, ber, delta, derive_seed
from .data import BlobSpec, Dataset, TriggerSet, generate_blobs, variant_blob_spec
from .extract import extract
from .keygen import KeyGenConfig, SecretKeyPair, WatermarkVector, generate_keys
from .model import ModelCheckpoint, ModelSpec, TrainConfig, fine_tune, mean_activation, train


@dataclass(frozen=True)
class PruneSpec:
    """Zero every weight with magnitude below eta; biases are untouched.

    layers selects which layers are in scope (0-based, output last);
    None means all of them.
    """

    eta: float
    layers: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")


@dataclass
class PruneResult:
    model: ModelCheckpoint
    zeroed: int
    total: int

    @property
    def fraction_zeroed(self) -> float:
        return self.zeroed / self.total if self.total else 0.0


def prune(model: ModelCheckpoint, spec: PruneSpec) -> PruneResult:
    """Magnitude pruning into a fresh checkpoint; the input is unmodified."""
    scope = set(spec.layers) if spec.layers is not None else set(range(model.spec.num_layers))
    pruned = model.clone()
    zeroed = 0
    total = 0
    for i, w in enumerate(pruned.weights):
        total += w.size
        if i in scope:
            mask = np.abs(w) < spec.eta
            zeroed += int(mask.sum())
            w[mask] = 0.0
    return PruneResult(pruned, zeroed, total)


@dataclass(frozen=True)
class ForgedKeySpec:
    """Forged key pairs drawn from the standard normal distribution."""

    count: int
    n_bits: int
    width: int
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("need at least one forged pair")


def forge_keys(spec: ForgedKeySpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """count i.i.d. (A', d') pairs with N(0,1) entries, deterministic per seed."""
    rng = SeededRng(spec.seed)
    pairs = []
    for _ in range(spec.count):
        a = rng.normal_matrix(spec.n_bits, spec.width)
        d = rng.standard_normal(spec.width)
        pairs.append((a, d))
    return pairs


def forged_key_bers(
    suspect: ModelCheckpoint,
    trigger: TriggerSet,
    keys: SecretKeyPair,
    watermark: WatermarkVector,
    spec: ForgedKeySpec,
    alpha: float | None = None,
) -> np.ndarray:
    """BER of extraction with each forged pair against the true watermark.

    The forger is assumed to know the protocol's scaling factor, so alpha
    defaults to the genuine one; pass another value to model a guessed
    alpha instead.
    """
    effective_alpha = keys.alpha if alpha is None else alpha
    fhat = mean_activation(suspect, trigger, keys.layer_index).values
    rates = np.empty(spec.count)
    for i, (a, d) in enumerate(forge_keys(spec)):
        extracted = delta(a @ (effective_alpha * fhat - d))
        rates[i] = ber(watermark.bits, extracted)
    return rates


def hyperparam_variant_config(base: TrainConfig, variant_seed: int) -> TrainConfig:
    """Same task and data, perturbed optimizer settings and a fresh seed
    (integrity 'different hyperparameters' case)."""
    knob = SeededRng(variant_seed)
    lr_factor = 0.5 + knob.uniform(1)[0]  # lr scaled into [0.5x, 1.5x)
    extra_epochs = int(knob.uniform(1)[0] * 10)
    return TrainConfig(
        epochs=base.epochs + extra_epochs,
        lr=base.lr * lr_factor,
        batch_size=base.batch_size,
        seed=variant_seed,
    )


def train_unmarked_variant(
    model_spec: ModelSpec,
    blob: BlobSpec,
    train_cfg: TrainConfig,
    variation: str,
    variant_seed: int,
) -> tuple[ModelCheckpoint, Dataset]:
    """Independently trained model of the same architecture and task.

    variation "hyperparams": same data, perturbed lr/epochs, fresh seed.
    variation "data": same hyperparameters, freshly generated dataset.
    """
    if variation == "hyperparams":
        dataset = generate_blobs(blob)
        cfg = hyperparam_variant_config(train_cfg, variant_seed)
    elif variation == "data":
        dataset = generate_blobs(variant_blob_spec(blob, variant_seed))
        cfg = replace(train_cfg, seed=variant_seed)
    else:
        raise ValueError(f"unknown variation kind {variation!r}")
    return train(model_spec, dataset, cfg), dataset


ATTACK_FINETUNE_EPOCHS = 5
ATTACK_FINETUNE_FREEZE = frozenset({0})  # hold the first hidden layer fixed


def finetune_attack(
    model: ModelCheckpoint,
    dataset: Dataset,
    lr: float,
    seed: int,
    epochs: int = ATTACK_FINETUNE_EPOCHS,
    freeze: frozenset[int] = ATTACK_FINETUNE_FREEZE,
) -> ModelCheckpoint:
    """Default fine-tuning attack: original data and lr, part of the net
    held fixed."""
    cfg = TrainConfig(epochs=epochs, lr=lr, batch_size=32, seed=seed)
    return fine_tune(model, dataset, cfg, freeze)


@dataclass
class OverwriteReport:
    """What happened when extra watermarks were layered onto one model."""

    bers: list[float]
    fingerprint_before: str
    fingerprint_after: str

    @property
    def model_untouched(self) -> bool:
        return self.fingerprint_before == self.fingerprint_after

    @property
    def all_extracted(self) -> bool:
        return all(b == 0.0 for b in self.bers)


def overwrite_scenario(
    model: ModelCheckpoint,
    trigger: TriggerSet,
    existing: list[tuple[WatermarkVector, SecretKeyPair]],
    new_watermarks: list[WatermarkVector],
    cfg: KeyGenConfig,
    layer_index: int,
) -> OverwriteReport:
    """Embed every new watermark, then re-extract all watermarks old and new.

    Key generation never writes to the model, so earlier watermarks must
    still extract with BER 0 and the fingerprint must be unchanged.
    """
    if not existing:
        raise ValueError("need at least one existing key pair")
    before = model.fingerprint()
    stacked = list(existing)
    for i, wm in enumerate(new_watermarks):
        new_cfg = replace(cfg, seed=derive_seed(cfg.seed, "overwrite", i + 1))
        stacked.append((wm, generate_keys(model, trigger, layer_index, wm, new_cfg)))
    rates = [
        ber(wm.bits, extract(model, trigger, keys)) for wm, keys in stacked
    ]
    return OverwriteReport(rates, before, model.fingerprint())
