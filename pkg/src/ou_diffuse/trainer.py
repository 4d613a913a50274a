"""Fit the noise model by watching the forward process on the training data."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import SampleMatrix, Scaler
from .model import NoiseModel, TrainConfig
from .nn import OptimizerConfig, OptimizerState, default_layer_dims, init_params, mlp_backward, optimizer_step
from .posterior import posterior_mean
from .schedule import NoiseSchedule

log = logging.getLogger(__name__)


class TrainingExample(NamedTuple):
    x_next: np.ndarray
    t_next: float
    target: np.ndarray
    noise: np.ndarray


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    steps: int = 0
    wall_time: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")


def _targets(kind, x_next, x0, n, noise, s):
    """Regression target per row; ``n`` is an int array of transition indices."""
    if kind == "epsilon":
        return noise
    if kind == "x0":
        return x0
    c_next = s.step_gamma[n] * s.cum_beta_sq[n] / s.cum_beta_sq[n + 1]
    c_zero = s.cum_gamma[n] * s.step_beta_sq[n] / s.cum_beta_sq[n + 1]
    return c_next[:, None] * x_next + c_zero[:, None] * x0


def make_training_example(x0, n: int, s: NoiseSchedule, rng: np.random.Generator,
                          prediction_target: str = "epsilon") -> TrainingExample:
    """One ``(x_{n+1}, t_{n+1}, target)`` triple from a data point ``x0``."""
    n = s.check_step(n)
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    z = rng.standard_normal(x0.shape)
    x_next = s.cum_gamma[n + 1] * x0 + s.cum_beta[n + 1] * z
    if prediction_target == "epsilon":
        target = z
    elif prediction_target == "x0":
        target = x0.copy()
    elif prediction_target == "mu":
        target = posterior_mean(x_next, x0, n, s)
    else:
        raise ValueError(f"unknown prediction target {prediction_target!r}")
    return TrainingExample(x_next, float(s.t[n + 1]), target, z)


def make_batch(x0: np.ndarray, s: NoiseSchedule, cfg: TrainConfig, rng: np.random.Generator):
    """Network inputs, time features and targets for a batch of data points.

    Returns ``(x_next, t_feature, target)``. Only ``x_next`` and the time
    feature are network inputs; ``x0`` enters through the target alone.
    """
    return _batch(x0, s, cfg, rng)[:3]


def _batch(x0, s, cfg, rng):
    b, d = x0.shape
    N = s.n_steps
    if cfg.timestep_sampling == "all_steps_per_point":
        n = np.tile(np.arange(N), b)
        x0_rows = np.repeat(x0, N, axis=0)
    else:
        n = rng.integers(0, N, size=b)
        x0_rows = x0

    if cfg.literal_trajectories:
        x_next = _literal_states(x0, n, s, rng, cfg.timestep_sampling)
        noise = (x_next - s.cum_gamma[n + 1][:, None] * x0_rows) / s.cum_beta[n + 1][:, None]
    else:
        noise = rng.standard_normal(x0_rows.shape)
        x_next = s.cum_gamma[n + 1][:, None] * x0_rows + s.cum_beta[n + 1][:, None] * noise
    target = _targets(cfg.prediction_target, x_next, x0_rows, n, noise, s)
    t_feat = s.t[n + 1] / s.t[-1]
    return x_next, t_feat, target, n, x0_rows, noise


def network_regression(cfg: TrainConfig, s: NoiseSchedule, n, x0_rows, noise, target):
    """What the raw network is fitted to: ``(values, row weights or None)``.

    With the epsilon skip, ``||eps - beta x - gamma f||^2`` equals
    ``gamma^2 ||v - f||^2`` with ``v = gamma eps - beta x0``, so the loss is
    still the plain noise MSE.
    """
    if not (cfg.eps_skip and cfg.prediction_target == "epsilon"):
        return target, None
    g, b = s.cum_gamma[n + 1][:, None], s.cum_beta[n + 1][:, None]
    return g * noise - b * x0_rows, s.cum_gamma[n + 1] ** 2


def _literal_states(x0, n, s, rng, mode):
    """States ``x_{n+1}`` read off fully simulated recursive paths."""
    b, d = x0.shape
    N = s.n_steps
    x = x0.copy()
    path = np.empty((b, N, d))
    for k in range(N):
        x = s.step_gamma[k] * x + s.step_beta[k] * rng.standard_normal((b, d))
        path[:, k] = x
    if mode == "all_steps_per_point":
        return path.reshape(b * N, d)
    return path[np.arange(b), n]


def _as_array(data) -> tuple[np.ndarray, list[str]]:
    if isinstance(data, SampleMatrix):
        return data.features, list(data.columns)
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x, [f"x{j + 1}" for j in range(x.shape[1])]


def train(data, s: NoiseSchedule, cfg: TrainConfig, scaler: Scaler | None = None,
          progress=None) -> tuple[NoiseModel, TrainReport]:
    """Train on standardized data; ``scaler`` is stored for un-standardizing.

    ``progress(epoch, loss)`` is called after each epoch if given.
    """
    x, columns = _as_array(data)
    if x.shape[0] == 0:
        raise ValueError("cannot train on empty data")
    if not np.all(np.isfinite(x)):
        raise ValueError("training data contains non-finite values")
    m, d = x.shape
    if scaler is None:
        scaler = Scaler.identity(d, columns)

    rng = np.random.Generator(np.random.Philox(cfg.seed))
    dims = default_layer_dims(d, cfg.hidden_width, cfg.hidden_layers)
    params = init_params(dims, seed=cfg.seed, activation=cfg.activation)
    opt_cfg = OptimizerConfig(kind=cfg.optimizer, learning_rate=cfg.learning_rate)
    state = OptimizerState()
    report = TrainReport()
    best, stale = np.inf, 0
    ema = params.flat()
    t0 = time.perf_counter()

    for epoch in range(cfg.epochs):
        perm = rng.permutation(m)
        losses = []
        for lo in range(0, m, cfg.batch_size):
            x0 = x[perm[lo:lo + cfg.batch_size]]
            xb, tb, yb, n, x0_rows, noise = _batch(x0, s, cfg, rng)
            yb, wb = network_regression(cfg, s, n, x0_rows, noise, yb)
            loss, grads = mlp_backward(params, xb, tb, yb, wb)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch + 1}, step {report.steps + 1}; "
                    "lower the learning rate or check the input scaling")
            params, state = optimizer_step(params, grads, state, opt_cfg)
            report.steps += 1
            # warm-up keeps the average from remembering the random init
            k = report.steps
            decay = min(cfg.ema_decay, (1.0 + k) / (10.0 + k))
            ema = decay * ema + (1.0 - decay) * params.flat()
            losses.append(loss)
        epoch_loss = float(np.mean(losses))
        report.epoch_losses.append(epoch_loss)
        if progress is not None:
            progress(epoch + 1, epoch_loss)
        if cfg.plateau_patience is not None:
            if epoch_loss < best:
                best, stale = epoch_loss, 0
            else:
                stale += 1
                if stale >= cfg.plateau_patience:
                    log.info("loss plateau after %d epochs", epoch + 1)
                    break

    report.wall_time = time.perf_counter() - t0
    if cfg.ema_decay > 0:
        params = params.with_flat(ema)
    return NoiseModel(params, s, scaler, cfg), report
