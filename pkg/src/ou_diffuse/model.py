"""Trained noise model bundle and its JSON model file."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import rng as _rng
from .data import Scaler, atomic_write_text
from .nn import ACTIVATIONS, MlpParams, predict
from .schedule import NoiseSchedule, build_schedule

FORMAT = "ou-diffuse-model"
FORMAT_VERSION = 1
TRAINING_RNG = "numpy-philox"

TARGETS = ("epsilon", "x0", "mu")
TIMESTEP_MODES = ("one_random_step_per_point", "all_steps_per_point")


class ModelFileError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    prediction_target: str = "epsilon"
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    timestep_sampling: str = "one_random_step_per_point"
    optimizer: str = "adam"
    literal_trajectories: bool = False
    hidden_width: int = 128
    hidden_layers: int = 3
    activation: str = "silu"
    # epsilon target only: the network output f enters as
    # eps = beta_{n+1} x + gamma_{n+1} f, which is exact for pure noise
    eps_skip: bool = True
    # the returned weights are an exponential moving average of the iterates
    # with this decay (0 keeps the last iterate)
    ema_decay: float = 0.999
    # stop when the epoch loss has not improved for this many epochs
    plateau_patience: int | None = None

    def __post_init__(self):
        if self.prediction_target not in TARGETS:
            raise ValueError(f"prediction_target must be one of {TARGETS}, got {self.prediction_target!r}")
        if self.timestep_sampling not in TIMESTEP_MODES:
            raise ValueError(f"timestep_sampling must be one of {TIMESTEP_MODES}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        for name in ("epochs", "batch_size", "hidden_width", "hidden_layers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must be in [0, 1)")
        if self.plateau_patience is not None and self.plateau_patience < 1:
            raise ValueError("plateau_patience must be >= 1 when set")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class NoiseModel:
    params: MlpParams
    schedule: NoiseSchedule
    scaler: Scaler
    config: TrainConfig

    def __post_init__(self):
        d = self.params.out_dim
        if self.params.in_dim != d + 1:
            raise ValueError(f"network input {self.params.in_dim} != data dim {d} + 1")
        if self.scaler.dim != d:
            raise ValueError(f"scaler dim {self.scaler.dim} != network output {d}")

    @property
    def dim(self) -> int:
        return self.params.out_dim

    @property
    def target(self) -> str:
        return self.config.prediction_target

    def time_feature(self, n_next: int) -> float:
        """Normalized time t_{n+1} / t_N fed to the network."""
        return float(self.schedule.t[n_next] / self.schedule.t[-1])

    @property
    def uses_skip(self) -> bool:
        return self.config.eps_skip and self.target == "epsilon"

    def predict(self, x_next, n_next: int) -> np.ndarray:
        """Prediction of the training target at grid index ``n_next`` (1..N)."""
        if not 1 <= n_next <= self.schedule.n_steps:
            raise IndexError(f"time index {n_next} outside [1, {self.schedule.n_steps}]")
        out = predict(self.params, x_next, self.time_feature(n_next))
        if self.uses_skip:
            s = self.schedule
            out = s.cum_beta[n_next] * np.asarray(x_next, dtype=np.float64) + s.cum_gamma[n_next] * out
        return out


def model_to_dict(m: NoiseModel) -> dict:
    return {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "schedule": m.schedule.params(),
        "network": {
            "layer_dims": list(m.params.layer_dims),
            "activation": m.params.activation,
            "weights": [w.ravel().tolist() for w in m.params.weights],
            "biases": [b.tolist() for b in m.params.biases],
        },
        "scaler": m.scaler.to_dict(),
        "train_config": m.config.to_dict(),
        "rng": {"noise": _rng.ALGORITHM, "training": TRAINING_RNG},
    }


def model_from_dict(doc: dict) -> NoiseModel:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFileError("not an ou-diffuse model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model file version {doc.get('version')!r} "
                             f"(this build reads version {FORMAT_VERSION})")
    try:
        sched = build_schedule(**doc["schedule"])
        net = doc["network"]
        dims = [int(k) for k in net["layer_dims"]]
        ws = [np.array(w, dtype=np.float64).reshape(fi, fo)
              for w, fi, fo in zip(net["weights"], dims[:-1], dims[1:])]
        bs = [np.array(b, dtype=np.float64) for b in net["biases"]]
        params = MlpParams(tuple(dims), ws, bs, net["activation"])
        scaler = Scaler.from_dict(doc["scaler"])
        cfg = TrainConfig.from_dict(doc["train_config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"corrupted model file: {exc}") from exc
    noise_rng = doc.get("rng", {}).get("noise")
    if noise_rng != _rng.ALGORITHM:
        raise ModelFileError(f"model was made with RNG {noise_rng!r}, this build uses {_rng.ALGORITHM!r}")
    return NoiseModel(params, sched, scaler, cfg)


def dumps_model(m: NoiseModel) -> str:
    # json emits repr() of floats, which round-trips float64 exactly
    return json.dumps(model_to_dict(m), indent=1) + "\n"


def save_model(m: NoiseModel, path):
    atomic_write_text(path, dumps_model(m))


def load_model(path) -> NoiseModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)
