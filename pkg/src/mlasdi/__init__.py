"""Multi-stage latent space dynamics identification for parametric PDE snapshots.

Each stage is an autoencoder whose latent trajectories follow a linear ODE
identified by least squares, with the ODE coefficients interpolated over the
parameter space by Gaussian processes. Later stages fit the normalized residual
left by the earlier ones.
"""

from .autoencoder import AutoencoderPair, MlpNetwork, decode, encode, loss_and_gradients
from .data import (
    SnapshotTensor,
    generate_toy,
    generate_toy_family,
    load_snapshots,
    save_snapshots,
    toy_field,
)
from .errors import MlasdiError
from .gp_interp import GpCoefficientField, Kernel, fit_hyperparameters, sample_coefficients
from .latent_dynamics import SindyModel, estimate_time_derivative, fit_sindy
from .metrics import ErrorReport, max_relative_error, percentile_error, prediction_std_summary
from .rom import (
    Prediction,
    StageConfig,
    StageModel,
    StageStack,
    predict,
    rollout_latent,
    stage_residual,
    train_multistage,
    train_stage,
)
from .serialization import load_stack, save_stack

__version__ = "0.1.0"

__all__ = [
    "AutoencoderPair", "MlpNetwork", "encode", "decode", "loss_and_gradients",
    "SnapshotTensor", "generate_toy", "generate_toy_family", "load_snapshots",
    "save_snapshots", "toy_field", "MlasdiError", "GpCoefficientField", "Kernel",
    "fit_hyperparameters", "sample_coefficients", "SindyModel",
    "estimate_time_derivative", "fit_sindy", "ErrorReport", "max_relative_error",
    "percentile_error", "prediction_std_summary", "Prediction", "StageConfig",
    "StageModel", "StageStack", "predict", "rollout_latent", "stage_residual",
    "train_multistage", "train_stage", "load_stack", "save_stack",
]
