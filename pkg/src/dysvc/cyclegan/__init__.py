from .augment import FrameMask, expected_masked_fraction, fif_mask, sample_segment
from .config import BASE_VARIANTS, DESK_OVERRIDES, TS_SUFFIX, GanConfig, base_name, get_variant, variant_names
from .convert import Conversion, convert, convert_features
from .losses import (
    adversarial_loss,
    cycle_loss,
    identity_active,
    identity_loss,
    second_adversarial_loss,
    total_loss,
)
from .models import Discriminator, Generator, ModelPair
from .train import TrainingAborted, TrainResult, load_models, read_curves, train, write_curves

__all__ = [
    "BASE_VARIANTS",
    "Conversion",
    "DESK_OVERRIDES",
    "Discriminator",
    "FrameMask",
    "GanConfig",
    "Generator",
    "ModelPair",
    "TS_SUFFIX",
    "TrainResult",
    "TrainingAborted",
    "adversarial_loss",
    "base_name",
    "convert",
    "convert_features",
    "cycle_loss",
    "expected_masked_fraction",
    "fif_mask",
    "get_variant",
    "identity_active",
    "identity_loss",
    "load_models",
    "read_curves",
    "sample_segment",
    "second_adversarial_loss",
    "total_loss",
    "train",
    "variant_names",
    "write_curves",
]
