"""Discrete time grid and noise coefficients of the OU forward process.

Notation used throughout the package::

    gamma(t) = exp(-t)                 mean shrink from time 0 to t
    beta(t)  = sqrt(1 - exp(-2 t))     noise scale from time 0 to t

The grid is built from equally spaced per-step variances ``b_1 < ... < b_N``
with ``dt_n = -log(1 - b_n) / 2``, so that ``beta(dt_n)**2 == b_n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

DEFAULT_STEPS = 200
DEFAULT_BETA_MIN = 1e-4
DEFAULT_BETA_MAX = 0.2

# cum_beta[N] below this triggers a warning: X_N is then visibly non-standard.
TERMINAL_BETA_WARN = 0.999


class ScheduleWarning(UserWarning):
    pass


def _check_time(t):
    arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"time must be finite, got {t!r}")
    if np.any(arr < 0):
        raise ValueError(f"time must be nonnegative, got {t!r}")
    return arr


def gamma_of(t):
    """exp(-t) for scalar or array ``t >= 0``."""
    arr = _check_time(t)
    out = np.exp(-arr)
    return float(out) if out.ndim == 0 else out


def beta_of(t):
    """sqrt(1 - exp(-2t)) for scalar or array ``t >= 0``.

    Uses ``expm1`` so small times keep full relative precision.
    """
    arr = _check_time(t)
    out = np.sqrt(-np.expm1(-2.0 * arr))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed grid. Arrays are read-only.

    Indexing conventions:

    * ``step_var``, ``dt``, ``step_gamma``, ``step_beta`` have length N and
      entry ``k`` describes the transition ``k -> k+1`` (i.e. ``dt[k]`` is
      the 1-based ``dt_{k+1}``).
    * ``t``, ``cum_gamma``, ``cum_beta`` have length N+1 with ``t[0] = 0``.
    """

    n_steps: int
    b_min: float
    b_max: float
    step_var: np.ndarray = field(repr=False)
    dt: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    cum_gamma: np.ndarray = field(repr=False)
    cum_beta: np.ndarray = field(repr=False)
    step_gamma: np.ndarray = field(repr=False)
    step_beta: np.ndarray = field(repr=False)
    # squares evaluated directly from exp/expm1, not by squaring the roots
    cum_beta_sq: np.ndarray = field(repr=False)
    step_gamma_sq: np.ndarray = field(repr=False)
    step_beta_sq: np.ndarray = field(repr=False)

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def params(self) -> dict:
        return {"n_steps": self.n_steps, "b_min": self.b_min, "b_max": self.b_max}

    def check_step(self, n: int) -> int:
        """Validate a transition index ``0 <= n <= N-1``."""
        if isinstance(n, bool) or int(n) != n:
            raise TypeError(f"step index must be an integer, got {n!r}")
        n = int(n)
        if not 0 <= n < self.n_steps:
            raise IndexError(f"step index {n} outside [0, {self.n_steps - 1}]")
        return n


def _compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Running sums with a leading 0, Neumaier-compensated.

    exp(-t) turns the absolute error of t into relative error, so the plain
    cumulative sum loses digits on long grids.
    """
    out = np.empty(values.size + 1)
    out[0] = 0.0
    total = comp = 0.0
    for i, v in enumerate(values.tolist()):
        new = total + v
        if abs(total) >= abs(v):
            comp += (total - new) + v
        else:
            comp += (v - new) + total
        total = new
        out[i + 1] = total + comp
    return out


def build_schedule(
    n_steps: int = DEFAULT_STEPS,
    b_min: float = DEFAULT_BETA_MIN,
    b_max: float = DEFAULT_BETA_MAX,
) -> NoiseSchedule:
    if isinstance(n_steps, bool) or int(n_steps) != n_steps or n_steps < 2:
        raise ValueError(f"n_steps must be an integer >= 2, got {n_steps!r}")
    n_steps = int(n_steps)
    b_min = float(b_min)
    b_max = float(b_max)
    for name, b in (("b_min", b_min), ("b_max", b_max)):
        if not (math.isfinite(b) and 0.0 < b < 1.0):
            raise ValueError(f"{name} must lie in (0, 1), got {b!r}")
    if b_min >= b_max:
        raise ValueError(f"need b_min < b_max, got {b_min!r} >= {b_max!r}")

    k = np.arange(n_steps, dtype=np.float64)
    step_var = b_min + (b_max - b_min) * k / (n_steps - 1)
    dt = -0.5 * np.log1p(-step_var)
    t = _compensated_cumsum(dt)
    cum_gamma = np.exp(-t)
    step_gamma = np.exp(-dt)
    cum_beta_sq = -np.expm1(-2.0 * t)
    step_gamma_sq = np.exp(-2.0 * dt)
    step_beta_sq = -np.expm1(-2.0 * dt)
    cum_beta = np.sqrt(cum_beta_sq)
    step_beta = np.sqrt(step_beta_sq)

    arrays = (step_var, dt, t, cum_gamma, cum_beta, step_gamma, step_beta,
              cum_beta_sq, step_gamma_sq, step_beta_sq)
    for arr in arrays:
        arr.setflags(write=False)

    if cum_beta[-1] < TERMINAL_BETA_WARN:
        warnings.warn(
            f"terminal noise scale {cum_beta[-1]:.6f} < {TERMINAL_BETA_WARN}; "
            "X_N is not close to standard normal (raise b_max or n_steps)",
            ScheduleWarning,
            stacklevel=2,
        )
    return NoiseSchedule(
        n_steps=n_steps,
        b_min=b_min,
        b_max=b_max,
        step_var=step_var,
        dt=dt,
        t=t,
        cum_gamma=cum_gamma,
        cum_beta=cum_beta,
        step_gamma=step_gamma,
        step_beta=step_beta,
        cum_beta_sq=cum_beta_sq,
        step_gamma_sq=step_gamma_sq,
        step_beta_sq=step_beta_sq,
    )


def step_coeffs(s: NoiseSchedule, n: int) -> tuple[float, float]:
    """(gamma(dt_{n+1}), beta(dt_{n+1})) for the transition n -> n+1."""
    n = s.check_step(n)
    return float(s.step_gamma[n]), float(s.step_beta[n])
