"""Exact reverse-step posterior and the three ways of estimating its mean.

For the transition ``n -> n+1`` with ``g = gamma(dt_{n+1})``,
``b2 = beta(dt_{n+1})**2`` and cumulative ``gamma_n``, ``beta_n``::

    x_n | x_{n+1}, x_0  ~  N(mu, var * I)
    mu  = g beta_n^2 / beta_{n+1}^2 * x_{n+1} + gamma_n b2 / beta_{n+1}^2 * x_0
    var = b2 beta_n^2 / beta_{n+1}^2

All functions broadcast over leading axes: ``x_next`` may be ``(d,)`` or
``(m, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import as_points
from .schedule import NoiseSchedule

# Floor for beta_{n+1} in the epsilon -> mean conversion; only degenerate
# user schedules get near it.
BETA_FLOOR = 1e-12


@dataclass(frozen=True)
class PosteriorParams:
    mean: np.ndarray
    stddev: float

    def __post_init__(self):
        if self.stddev < 0 or not np.isfinite(self.stddev):
            raise ValueError(f"stddev must be finite and >= 0, got {self.stddev}")
        if not np.all(np.isfinite(self.mean)):
            raise ValueError("posterior mean is not finite")


def _pair(a, b, names):
    a = as_points(a, names[0])
    b = as_points(b, names[1])
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {names[0]} {a.shape} vs {names[1]} {b.shape}")
    return a, b


def _check_next(s: NoiseSchedule, n_next: int) -> int:
    if isinstance(n_next, bool) or int(n_next) != n_next:
        raise TypeError(f"time index must be an integer, got {n_next!r}")
    n_next = int(n_next)
    if n_next == 0:
        raise ValueError("time index 0 has beta_0 = 0; noise is undefined there")
    if not 1 <= n_next <= s.n_steps:
        raise IndexError(f"time index {n_next} outside [1, {s.n_steps}]")
    return n_next


def mean_coefficients(s: NoiseSchedule, n: int) -> tuple[float, float]:
    """Weights ``(on x_{n+1}, on x_0)`` of the posterior mean."""
    n = s.check_step(n)
    denom = s.cum_beta_sq[n + 1]
    c_next = s.step_gamma[n] * s.cum_beta_sq[n] / denom
    c_zero = s.cum_gamma[n] * s.step_beta_sq[n] / denom
    return float(c_next), float(c_zero)


def posterior_mean(x_next, x0, n: int, s: NoiseSchedule) -> np.ndarray:
    x_next, x0 = _pair(x_next, x0, ("x_next", "x0"))
    c_next, c_zero = mean_coefficients(s, n)
    return c_next * x_next + c_zero * x0


def posterior_var(n: int, s: NoiseSchedule) -> float:
    n = s.check_step(n)
    return float(s.step_beta_sq[n] * s.cum_beta_sq[n] / s.cum_beta_sq[n + 1])


def posterior_std(n: int, s: NoiseSchedule) -> float:
    return float(np.sqrt(posterior_var(n, s)))


def posterior(x_next, x0, n: int, s: NoiseSchedule) -> PosteriorParams:
    return PosteriorParams(mean=posterior_mean(x_next, x0, n, s), stddev=posterior_std(n, s))


def eps_from_pair(x_next, x0, n_next: int, s: NoiseSchedule) -> np.ndarray:
    """Noise that carries ``x0`` to ``x_next`` at time index ``n_next``."""
    n_next = _check_next(s, n_next)
    x_next, x0 = _pair(x_next, x0, ("x_next", "x0"))
    return (x_next - s.cum_gamma[n_next] * x0) / s.cum_beta[n_next]


def x0_from_eps(x_next, eps, n_next: int, s: NoiseSchedule) -> np.ndarray:
    n_next = _check_next(s, n_next)
    x_next, eps = _pair(x_next, eps, ("x_next", "eps"))
    return (x_next - s.cum_beta[n_next] * eps) / s.cum_gamma[n_next]


def mean_from_eps(x_next, eps, n: int, s: NoiseSchedule) -> np.ndarray:
    """Posterior mean written in terms of the noise instead of ``x0``."""
    n = s.check_step(n)
    x_next, eps = _pair(x_next, eps, ("x_next", "eps"))
    beta_next = max(float(s.cum_beta[n + 1]), BETA_FLOOR)
    return (x_next - (s.step_beta_sq[n] / beta_next) * eps) / s.step_gamma[n]


def mean_from_x0_hat(x_next, x0_hat, n: int, s: NoiseSchedule) -> np.ndarray:
    """Same formula as :func:`posterior_mean`, fed a predicted ``x0``."""
    return posterior_mean(x_next, x0_hat, n, s)
