"""Diffusion models on the Ornstein-Uhlenbeck process, in numpy."""

__version__ = "0.1.0"

from .schedule import NoiseSchedule, beta_of, build_schedule, gamma_of, step_coeffs  # noqa: E402
from .rng import NormalStreams  # noqa: E402
from .model import NoiseModel, TrainConfig, load_model, save_model  # noqa: E402

__all__ = [
    "NoiseModel",
    "NoiseSchedule",
    "NormalStreams",
    "TrainConfig",
    "beta_of",
    "build_schedule",
    "gamma_of",
    "load_model",
    "save_model",
    "step_coeffs",
]
