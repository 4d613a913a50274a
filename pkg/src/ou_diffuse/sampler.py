"""Ancestral reverse diffusion from standard-normal seeds.

Sample ``k`` reads stream ``k`` of :class:`~ou_diffuse.rng.NormalStreams`:
counter N seeds ``x_N`` and counter ``n`` is the noise added when stepping
``n+1 -> n``. The noise seen by a sample is therefore bitwise independent
of batch size, chunking and thread count. Outputs are bitwise identical for
a fixed chunk size whatever the thread count; across different batch sizes
they agree to rounding only, because BLAS may treat leftover rows of a
matrix product with a different kernel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import SampleMatrix, invert_scaler
from .posterior import mean_from_eps, mean_from_x0_hat, posterior_std
from .rng import NormalStreams

METHODS = ("epsilon", "x0", "mu")


@dataclass(frozen=True)
class GenerationConfig:
    n_samples: int
    seed: int = 0
    method: str | None = None  # None: follow the model's training target

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.method is not None and self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")


def resolve_method(target: str, method: str | None) -> str:
    """Check that ``method`` can be served by a model trained on ``target``.

    epsilon and x0 outputs convert into each other exactly; a mean-trained
    model can only be used directly.
    """
    method = method or target
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if (method == "mu") != (target == "mu"):
        raise ValueError(f"a model trained on {target!r} cannot be sampled with method {method!r}")
    return method


def _mean_estimate(model, x, n, method):
    s = model.schedule
    out = model.predict(x, n + 1)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"model output is not finite at step {n}")
    target = model.target
    if method == "mu":
        return out
    g_next, b_next = s.cum_gamma[n + 1], s.cum_beta[n + 1]
    if method == "epsilon":
        eps = out if target == "epsilon" else (x - g_next * out) / b_next
        return mean_from_eps(x, eps, n, s)
    x0_hat = out if target == "x0" else (x - b_next * out) / g_next
    return mean_from_x0_hat(x, x0_hat, n, s)


def reverse_chain(model, rng: NormalStreams, ids: np.ndarray, method: str | None = None,
                  snapshots=()) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Run the reverse chain for the given stream ids (standardized space).

    Returns ``(x_0, {n: x_n for n in snapshots})``.
    """
    s = model.schedule
    method = resolve_method(model.target, method)
    d = model.dim
    N = s.n_steps
    keep = set(int(n) for n in snapshots)
    x = rng.normal(ids, N, d)
    saved = {N: x.copy()} if N in keep else {}
    for n in range(N - 1, -1, -1):
        mu = _mean_estimate(model, x, n, method)
        sigma = posterior_std(n, s)
        x = mu + sigma * rng.normal(ids, n, d) if sigma > 0 else mu
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0])
            raise FloatingPointError(f"non-finite state at step {n} (sample stream {int(ids[bad])})")
        if n in keep:
            saved[n] = x.copy()
    return x, saved


def generate_one(model, rng: NormalStreams, stream: int = 0, method: str | None = None) -> np.ndarray:
    """One standardized sample ``x_0`` from stream ``stream``."""
    x, _ = reverse_chain(model, rng, np.array([stream]), method)
    return x[0]


def generate_standardized(model, cfg: GenerationConfig, workers: int = 1,
                          chunk: int = 4096) -> np.ndarray:
    rng = NormalStreams(cfg.seed)
    ids = np.arange(cfg.n_samples, dtype=np.int64)
    parts = [ids[i:i + chunk] for i in range(0, ids.size, chunk)]

    def run(block):
        return reverse_chain(model, rng, block, cfg.method)[0]

    if workers > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(run, parts))
    else:
        out = [run(p) for p in parts]
    return np.concatenate(out, axis=0)


def generate_batch(model, cfg: GenerationConfig, workers: int = 1) -> SampleMatrix:
    """``cfg.n_samples`` draws mapped back to the original feature scale."""
    z = generate_standardized(model, cfg, workers)
    columns = list(model.scaler.columns) or [f"x{j + 1}" for j in range(model.dim)]
    return SampleMatrix(invert_scaler(z, model.scaler), columns)
