from .architectures import (
    AE_VARIANT_UNITS,
    FC_VARIANT_HIDDEN,
    FIELD_HEADS,
    LATENT_SIZE,
    REFERENCE_HIDDEN,
    REFERENCE_UNITS,
    autoencoder_for_field,
    build_autoencoder,
    build_regressor,
    regressor_variant,
)
from .bundle import bundle_hash, load_bundle, save_bundle
from .layers import (
    BatchNorm,
    Conv,
    ConvTranspose,
    Crop,
    Dense,
    Flatten,
    MaxPool,
    Reshape,
)
from .losses import bce, bce_grad, get_loss, mse, mse_grad
from .model import Model, from_descriptors, xavier_init
from .optim import Adam
from .train import TrainConfig, TrainResult, train_model

__all__ = [
    "AE_VARIANT_UNITS",
    "FC_VARIANT_HIDDEN",
    "FIELD_HEADS",
    "LATENT_SIZE",
    "REFERENCE_HIDDEN",
    "REFERENCE_UNITS",
    "Adam",
    "BatchNorm",
    "Conv",
    "ConvTranspose",
    "Crop",
    "Dense",
    "Flatten",
    "MaxPool",
    "Model",
    "Reshape",
    "TrainConfig",
    "TrainResult",
    "autoencoder_for_field",
    "bce",
    "bce_grad",
    "build_autoencoder",
    "build_regressor",
    "bundle_hash",
    "from_descriptors",
    "get_loss",
    "load_bundle",
    "mse",
    "mse_grad",
    "regressor_variant",
    "save_bundle",
    "train_model",
    "xavier_init",
]
