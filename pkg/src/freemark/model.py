"""Minimal deterministic feedforward engine: ReLU MLPs trained with
minibatch SGD on softmax cross-entropy.

Everything a checkpoint contains is byte-serializable in a canonical form;
the SHA-256 of those bytes is the model fingerprint used by the
non-invasiveness checks.  Forward passes and training are deterministic
functions of (spec, data, seed).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .core import SeededRng
from .data import Dataset, TriggerSet
from .errors import NothingToTrainError, TrainingDivergedError
from .serialize import dumps_matrix, dumps_vector, read_array, sha256_hex

CHECKPOINT_MAGIC = b"FMCK"
CHECKPOINT_VERSION = 1

# Hidden layer whose mean activation the keys bind to, 0-based.
DEFAULT_TARGET_LAYER = 1


@dataclass(frozen=True)
class ModelSpec:
    """Layer widths of an MLP: input -> hidden... -> classes, ReLU between."""

    input_dim: int = 8
    hidden: tuple[int, ...] = (32, 32)
    num_classes: int = 4

    def __post_init__(self):
        if self.input_dim < 1 or self.num_classes < 2 or len(self.hidden) < 1:
            raise ValueError(f"degenerate model spec {self}")

    @property
    def num_layers(self) -> int:
        return len(self.hidden) + 1

    def layer_dims(self) -> list[tuple[int, int]]:
        widths = [self.input_dim, *self.hidden, self.num_classes]
        return list(zip(widths[:-1], widths[1:]))

    def hidden_width(self, layer_index: int) -> int:
        if not 0 <= layer_index < len(self.hidden):
            raise IndexError(
                f"hidden layer index {layer_index} out of range 0..{len(self.hidden) - 1}"
            )
        return self.hidden[layer_index]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    lr: float = 0.05
    batch_size: int = 32
    seed: int = 0


@dataclass
class ModelCheckpoint:
    """Full parameter state of a trained MLP plus training provenance."""

    spec: ModelSpec
    weights: list[np.ndarray]  # weights[i]: (fan_in, fan_out)
    biases: list[np.ndarray]
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = self.spec.layer_dims()
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise ValueError("parameter count does not match spec")
        for (fan_in, fan_out), w, b in zip(dims, self.weights, self.biases):
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ValueError(
                    f"layer shape mismatch: expected {(fan_in, fan_out)}, got {w.shape}"
                )

    def clone(self) -> "ModelCheckpoint":
        return ModelCheckpoint(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            json.loads(json.dumps(self.training_meta)),
        )

    # -- inference ---------------------------------------------------------

    def hidden_activations(self, x: np.ndarray) -> list[np.ndarray]:
        """Post-ReLU outputs of every hidden layer for a batch of inputs."""
        acts = []
        h = np.asarray(x, dtype=np.float64)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            acts.append(h)
        return acts

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=np.float64)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def accuracy(self, dataset: Dataset) -> float:
        return float(np.mean(self.predict(dataset.features) == dataset.labels))

    # -- canonical serialization -------------------------------------------

    def to_bytes(self) -> bytes:
        header = {
            "spec": {
                "input_dim": self.spec.input_dim,
                "hidden": list(self.spec.hidden),
                "num_classes": self.spec.num_classes,
            },
            "training_meta": self.training_meta,
            "version": CHECKPOINT_VERSION,
        }
        header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        chunks = [CHECKPOINT_MAGIC, struct.pack("<HI", CHECKPOINT_VERSION, len(header_bytes)), header_bytes]
        for w, b in zip(self.weights, self.biases):
            chunks.append(dumps_matrix(w))
            chunks.append(dumps_vector(b))
        return b"".join(chunks)

    @staticmethod
    def from_bytes(data: bytes) -> "ModelCheckpoint":
        if data[:4] != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint: bad magic")
        version, header_len = struct.unpack_from("<HI", data, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        pos = 10
        header = json.loads(data[pos : pos + header_len].decode())
        pos += header_len
        spec = ModelSpec(
            input_dim=header["spec"]["input_dim"],
            hidden=tuple(header["spec"]["hidden"]),
            num_classes=header["spec"]["num_classes"],
        )
        weights, biases = [], []
        for _ in spec.layer_dims():
            w, pos = read_array(data, pos)
            b, pos = read_array(data, pos)
            weights.append(w)
            biases.append(b)
        if pos != len(data):
            raise ValueError("trailing bytes after checkpoint")
        return ModelCheckpoint(spec, weights, biases, header["training_meta"])

    def fingerprint(self) -> str:
        return sha256_hex(self.to_bytes())

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @staticmethod
    def load(path) -> "ModelCheckpoint":
        with open(path, "rb") as fh:
            return ModelCheckpoint.from_bytes(fh.read())


@dataclass
class ActivationVector:
    """Mean post-activation output of one hidden layer over a trigger set."""

    layer_index: int
    values: np.ndarray

    @property
    def width(self) -> int:
        return self.values.size


def _init_params(spec: ModelSpec, rng: SeededRng) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_dims():
        weights.append(rng.normal_matrix(fan_in, fan_out, scale=np.sqrt(2.0 / fan_in)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _softmax_xent_grad(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    loss = float(-np.mean(shifted[np.arange(n), labels] - np.log(expz.sum(axis=1))))
    grad = probs
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _sgd(
    model: ModelCheckpoint,
    dataset: Dataset,
    cfg: TrainConfig,
    trainable: list[bool],
) -> list[float]:
    """In-place minibatch SGD; returns the per-epoch train-accuracy trace."""
    rng = SeededRng(cfg.seed)
    n = dataset.size
    trace = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            x, y = dataset.features[batch], dataset.labels[batch]

            pre_acts, post = [], x
            inputs = [x]
            for w, b in zip(model.weights[:-1], model.biases[:-1]):
                z = post @ w + b
                pre_acts.append(z)
                post = np.maximum(z, 0.0)
                inputs.append(post)
            logits = post @ model.weights[-1] + model.biases[-1]

            loss, dz = _softmax_xent_grad(logits, y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became non-finite ({loss})")

            for i in range(len(model.weights) - 1, -1, -1):
                dw = inputs[i].T @ dz
                db = dz.sum(axis=0)
                if i > 0:
                    dz = (dz @ model.weights[i].T) * (pre_acts[i - 1] > 0)
                if trainable[i]:
                    model.weights[i] -= cfg.lr * dw
                    model.biases[i] -= cfg.lr * db
        trace.append(model.accuracy(dataset))
    return trace


def train(spec: ModelSpec, dataset: Dataset, cfg: TrainConfig) -> ModelCheckpoint:
    """Train from a seeded initialization; deterministic per (spec, data, cfg)."""
    if cfg.epochs < 1:
        raise ValueError("epochs must be at least 1")
    if dataset.features.shape[1] != spec.input_dim:
        raise ValueError(
            f"dataset dim {dataset.features.shape[1]} != model input {spec.input_dim}"
        )
    init_rng, sgd_seed = SeededRng(cfg.seed).split(2)
    weights, biases = _init_params(spec, init_rng)
    model = ModelCheckpoint(spec, weights, biases, {})
    trace = _sgd(model, dataset, replace(cfg, seed=sgd_seed.seed), [True] * spec.num_layers)
    model.training_meta = {
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "lr": cfg.lr,
        "batch_size": cfg.batch_size,
        "dataset_id": dataset.dataset_id,
        "accuracy_trace": trace,
    }
    return model


def fine_tune(
    model: ModelCheckpoint,
    dataset: Dataset,
    cfg: TrainConfig,
    freeze: frozenset[int] | set[int] = frozenset(),
) -> ModelCheckpoint:
    """Continue SGD on a copy, holding the listed layers constant.

    Layers are indexed 0..num_layers-1 with the output layer last.  Frozen
    parameters are byte-identical before and after.
    """
    freeze = frozenset(freeze)
    num_layers = model.spec.num_layers
    bad = [i for i in freeze if not 0 <= i < num_layers]
    if bad:
        raise ValueError(f"freeze indices out of range: {bad}")
    if len(freeze) == num_layers:
        raise NothingToTrainError("every layer is frozen")
    if cfg.epochs < 1:
        raise ValueError("epochs must be at least 1")
    tuned = model.clone()
    trainable = [i not in freeze for i in range(num_layers)]
    trace = _sgd(tuned, dataset, cfg, trainable)
    tuned.training_meta = dict(model.training_meta)
    tuned.training_meta["fine_tune"] = {
        "epochs": cfg.epochs,
        "lr": cfg.lr,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "frozen_layers": sorted(freeze),
        "accuracy_trace": trace,
    }
    return tuned


def mean_activation(model: ModelCheckpoint, trigger: TriggerSet, layer_index: int) -> ActivationVector:
    """Elementwise mean of layer layer_index's post-activation outputs over
    the trigger samples (numpy pairwise summation, fixed row order)."""
    model.spec.hidden_width(layer_index)
    acts = model.hidden_activations(trigger.features)[layer_index]
    return ActivationVector(layer_index, np.mean(acts, axis=0))
