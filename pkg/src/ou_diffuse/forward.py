"""Forward OU noising: closed form, one-step recursion, batched paths.

Randomness always comes from :class:`~ou_diffuse.rng.NormalStreams`; path
``k`` of a batch reads stream ``first_stream + k`` and the noise for the
transition ``n -> n+1`` is counter ``n`` of that stream.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .rng import NormalStreams
from .schedule import NoiseSchedule, beta_of, gamma_of

_BLOCK = 8


def as_points(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite float64 array; scalars become 1-vectors."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _same_shape(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class Trajectory:
    """One forward path ``x_0 .. x_N`` on a schedule grid."""

    points: np.ndarray  # (N+1, d)
    schedule: NoiseSchedule

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[0] != self.schedule.n_steps + 1:
            raise ValueError(
                f"trajectory needs shape (N+1, d) = ({self.schedule.n_steps + 1}, d), "
                f"got {self.points.shape}"
            )
        if not np.all(np.isfinite(self.points)):
            raise ValueError("trajectory contains non-finite values")

    @property
    def times(self) -> np.ndarray:
        return self.schedule.t

    def __len__(self):
        return self.points.shape[0]


def closed_form_sample(x0, t, z) -> np.ndarray:
    """gamma(t) * x0 + beta(t) * z."""
    x0 = as_points(x0, "x0")
    z = as_points(z, "z")
    _same_shape(x0, z, "closed_form_sample")
    return gamma_of(t) * x0 + beta_of(t) * z


def recursive_step(x_n, n: int, z, s: NoiseSchedule) -> np.ndarray:
    """One transition ``n -> n+1``: gamma(dt_{n+1}) x_n + beta(dt_{n+1}) z."""
    n = s.check_step(n)
    x_n = as_points(x_n, "x_n")
    z = as_points(z, "z")
    _same_shape(x_n, z, "recursive_step")
    return s.step_gamma[n] * x_n + s.step_beta[n] * z


def simulate_trajectory(x0, s: NoiseSchedule, rng: NormalStreams, stream: int = 0) -> Trajectory:
    x0 = as_points(x0, "x0")
    if x0.ndim != 1:
        raise ValueError(f"x0 must be a single point, got shape {x0.shape}")
    paths = simulate_paths(x0, s, rng, 1, first_stream=stream)
    return Trajectory(points=paths[0], schedule=s)


def _paths_chunk(x0, s, rng, ids, record_all):
    m, d = ids.size, x0.shape[-1]
    x = np.broadcast_to(x0, (m, d)).copy()
    out = np.empty((m, s.n_steps + 1, d)) if record_all else None
    if record_all:
        out[:, 0] = x
    for c in range(0, s.n_steps, _BLOCK):
        k = min(_BLOCK, s.n_steps - c)
        z = rng.normal_block(ids, c, k, d)
        for j in range(k):
            n = c + j
            x *= s.step_gamma[n]
            x += s.step_beta[n] * z[:, j]
            if record_all:
                out[:, n + 1] = x
    return out if record_all else x


def simulate_paths(
    x0,
    s: NoiseSchedule,
    rng: NormalStreams,
    n_paths: int,
    *,
    first_stream: int = 0,
    record: str = "all",
    workers: int = 1,
    chunk: int = 65536,
) -> np.ndarray:
    """Run ``n_paths`` independent recursions.

    ``x0`` is either one point (shared by all paths) or an ``(n_paths, d)``
    array of starting points. With ``record="all"`` the result has shape
    ``(n_paths, N+1, d)``, with ``record="final"`` only ``x_N`` is kept,
    shape ``(n_paths, d)``. Output does not depend on ``workers`` or
    ``chunk``.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if record not in ("all", "final"):
        raise ValueError(f"record must be 'all' or 'final', got {record!r}")
    x0 = as_points(x0, "x0")
    if x0.ndim == 1:
        starts = None
    elif x0.ndim == 2 and x0.shape[0] == n_paths:
        starts = x0
    else:
        raise ValueError(f"x0 shape {x0.shape} incompatible with n_paths={n_paths}")

    ids = np.arange(first_stream, first_stream + n_paths, dtype=np.int64)
    bounds = [(i, min(i + chunk, n_paths)) for i in range(0, n_paths, chunk)]
    record_all = record == "all"

    def run(b):
        lo, hi = b
        start = x0 if starts is None else starts[lo:hi]
        return _paths_chunk(start, s, rng, ids[lo:hi], record_all)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    return np.concatenate(parts, axis=0)


def ito_mc_oracle(
    g,
    a: float,
    b: float,
    n_substeps: int,
    n_samples: int,
    rng: NormalStreams,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the law of the Ito integral of ``g`` on [a, b].

    Each sample is ``sum_i g(s_i) * (B_{s_{i+1}} - B_{s_i})`` over equal
    substeps with left-endpoint evaluation ``s_i = a + i h``. Returns the
    sample mean and (unbiased) sample variance over ``n_samples`` paths;
    for square-integrable ``g`` these should approach 0 and
    ``int_a^b g(s)^2 ds``.
    """
    a, b = float(a), float(b)
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise ValueError(f"need finite a < b, got [{a}, {b}]")
    if n_substeps < 1 or n_samples < 1:
        raise ValueError("n_substeps and n_samples must be >= 1")
    h = (b - a) / n_substeps
    s_left = a + h * np.arange(n_substeps)
    weights = np.broadcast_to(np.asarray(g(s_left), dtype=np.float64), s_left.shape)
    if not np.all(np.isfinite(weights)):
        raise ValueError("integrand is not finite on the grid")
    weights = weights * np.sqrt(h)

    ids = np.arange(n_samples, dtype=np.int64)
    total = np.zeros(n_samples)
    block = 64
    for c in range(0, n_substeps, block):
        k = min(block, n_substeps - c)
        z = rng.normal_block(ids, c, k, 1)[:, :, 0]
        total += z @ weights[c:c + k]
    mean = float(total.mean())
    var = float(total.var(ddof=1)) if n_samples > 1 else 0.0
    return mean, var
