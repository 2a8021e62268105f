"""Non-invasive white-box DNN watermarking.

Secret keys are derived from a watermark and a host model's activations by
gradient descent; ownership of a suspect model is decided by the bit-error
rate of the watermark extracted with those keys.  The host model is never
modified.
"""

from .core import RNG_ALGORITHM_ID, SeededRng, ber, delta, matvec, sample_gaussian_vector, sigmoid
from .data import BlobSpec, Dataset, TriggerSet, generate_blobs, select_trigger_set
from .extract import BerReport, extract, verify
from .keygen import (
    KeyGenConfig,
    SecretKeyPair,
    WatermarkVector,
    derive_d_and_alpha,
    derive_matrix,
    generate_keys,
)
from .model import (
    DEFAULT_TARGET_LAYER,
    ActivationVector,
    ModelCheckpoint,
    ModelSpec,
    TrainConfig,
    fine_tune,
    mean_activation,
    train,
)
from .registry import KeyRecord, KeyStore

__version__ = "0.1.0"

__all__ = [
    "RNG_ALGORITHM_ID",
    "SeededRng",
    "ber",
    "delta",
    "matvec",
    "sample_gaussian_vector",
    "sigmoid",
    "BlobSpec",
    "Dataset",
    "TriggerSet",
    "generate_blobs",
    "select_trigger_set",
    "BerReport",
    "extract",
    "verify",
    "KeyGenConfig",
    "SecretKeyPair",
    "WatermarkVector",
    "derive_d_and_alpha",
    "derive_matrix",
    "generate_keys",
    "DEFAULT_TARGET_LAYER",
    "ActivationVector",
    "ModelCheckpoint",
    "ModelSpec",
    "TrainConfig",
    "fine_tune",
    "mean_activation",
    "train",
    "KeyRecord",
    "KeyStore",
    "__version__",
]
