"""Synthetic classification data and trigger-set selection.

The stand-in task is Gaussian blobs: each class gets a seeded random center
and isotropic noise.  A CSV loader is provided for plugging in external
data; nothing downstream cares where the features came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SeededRng, derive_seed
from .serialize import sha256_hex


@dataclass(frozen=True)
class BlobSpec:
    """Generator parameters for the Gaussian-blob task."""

    num_classes: int = 4
    per_class: int = 250
    noise: float = 0.5
    dim: int = 8
    center_scale: float = 3.0
    seed: int = 7

    def dataset_id(self) -> str:
        return (
            f"blobs-c{self.num_classes}-n{self.per_class}-d{self.dim}"
            f"-noise{self.noise}-scale{self.center_scale}-seed{self.seed}"
        )


@dataclass
class Dataset:
    features: np.ndarray  # (n, dim) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int
    dataset_id: str
    spec: BlobSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with feature rows")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels out of range")

    @property
    def size(self) -> int:
        return self.features.shape[0]

    def class_indices(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


def generate_blobs(spec: BlobSpec) -> Dataset:
    """Deterministic blob dataset: class c is centered at a seeded random
    point scaled by center_scale, with isotropic N(0, noise^2) scatter."""
    if spec.num_classes < 2:
        raise ValueError("need at least two classes")
    if spec.per_class < 1:
        raise ValueError("need at least one sample per class")
    center_rng, noise_rng = SeededRng(spec.seed).split(2)
    centers = center_rng.normal_matrix(spec.num_classes, spec.dim, scale=spec.center_scale)
    n = spec.num_classes * spec.per_class
    scatter = noise_rng.normal_matrix(n, spec.dim, scale=spec.noise) if spec.noise > 0 else np.zeros((n, spec.dim))
    labels = np.repeat(np.arange(spec.num_classes, dtype=np.int64), spec.per_class)
    features = centers[labels] + scatter
    return Dataset(features, labels, spec.num_classes, spec.dataset_id(), spec)


CSV_HEADER_NOTE = "feature columns first, integer class label in the last column"


def save_csv(dataset: Dataset, path) -> None:
    dim = dataset.features.shape[1]
    header = ",".join([f"f{i}" for i in range(dim)] + ["label"])
    body = np.column_stack([dataset.features, dataset.labels.astype(np.float64)])
    np.savetxt(path, body, delimiter=",", header=header, comments="", fmt="%.17g")


def load_csv(path, num_classes: int | None = None, dataset_id: str | None = None) -> Dataset:
    """Load the documented CSV layout: header line, then one row per sample
    with the label in the last column."""
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    features = body[:, :-1].astype(np.float64)
    labels = body[:, -1].astype(np.int64)
    classes = num_classes if num_classes is not None else int(labels.max()) + 1
    return Dataset(features, labels, classes, dataset_id or f"csv:{path}")


@dataclass
class TriggerSet:
    """A fixed, digest-stamped subset of the dataset used to elicit
    activations; holds at least one sample of every label."""

    indices: np.ndarray  # (k,) int64 into the source dataset
    features: np.ndarray  # (k, dim) resolved feature rows
    labels: np.ndarray  # (k,) int64
    digest: str

    @property
    def size(self) -> int:
        return self.indices.size

    @staticmethod
    def resolve(dataset: Dataset, indices: np.ndarray) -> "TriggerSet":
        indices = np.asarray(indices, dtype=np.int64)
        features = np.ascontiguousarray(dataset.features[indices], dtype=np.float64)
        labels = dataset.labels[indices]
        return TriggerSet(indices, features, labels, trigger_digest(features))


def trigger_digest(features: np.ndarray) -> str:
    return sha256_hex(np.ascontiguousarray(features, dtype="<f8").tobytes())


def select_trigger_set(dataset: Dataset, per_class: int, rng: SeededRng) -> TriggerSet:
    """per_class seeded draws without replacement from every label."""
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    chosen = []
    for label in range(dataset.num_classes):
        pool = dataset.class_indices(label)
        if pool.size < per_class:
            raise ValueError(
                f"class {label} has only {pool.size} samples, need {per_class}"
            )
        chosen.append(np.sort(rng.choice_without_replacement(pool, per_class)))
    return TriggerSet.resolve(dataset, np.concatenate(chosen))


def trigger_to_bytes(trigger: TriggerSet) -> bytes:
    from .serialize import dumps_matrix, dumps_vector

    return b"".join(
        [
            dumps_vector(trigger.indices.astype(np.float64)),
            dumps_matrix(trigger.features),
            dumps_vector(trigger.labels.astype(np.float64)),
        ]
    )


def trigger_from_bytes(data: bytes) -> TriggerSet:
    from .serialize import read_array

    indices, pos = read_array(data, 0)
    features, pos = read_array(data, pos)
    labels, pos = read_array(data, pos)
    if pos != len(data):
        raise ValueError("trailing bytes after trigger record")
    return TriggerSet(
        indices.astype(np.int64),
        np.ascontiguousarray(features),
        labels.astype(np.int64),
        trigger_digest(features),
    )


def variant_blob_spec(base: BlobSpec, variant_seed: int) -> BlobSpec:
    """Same task shape, freshly seeded data (integrity 'different data' case)."""
    return BlobSpec(
        num_classes=base.num_classes,
        per_class=base.per_class,
        noise=base.noise,
        dim=base.dim,
        center_scale=base.center_scale,
        seed=derive_seed(base.seed, "variant-data", variant_seed),
    )
