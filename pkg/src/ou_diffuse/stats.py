"""Density estimates, two-sample distance and classification metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SampleMatrix


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


def silverman_bandwidth(samples) -> float:
    """Rule of thumb ``1.06 * std * m**(-1/5)``."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    return float(1.06 * x.std(ddof=1) * x.size ** (-0.2))


def kde_1d(samples, grid, bandwidth: float | None = None, chunk: int = 4096) -> KdeCurve:
    """Gaussian-kernel density estimate evaluated on ``grid``."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    g = np.asarray(grid, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("kde needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(x)
        if not bandwidth > 0:
            raise ValueError("samples are constant; pass an explicit bandwidth")
    elif not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    h = float(bandwidth)
    dens = np.zeros(g.size)
    # accumulate over sample chunks to bound the (grid x samples) temporary
    for lo in range(0, x.size, chunk):
        u = (g[:, None] - x[None, lo:lo + chunk]) / h
        dens += np.exp(-0.5 * u * u).sum(axis=1)
    dens /= x.size * h * np.sqrt(2.0 * np.pi)
    return KdeCurve(g, dens, h)


def _points(a) -> np.ndarray:
    x = a.features if isinstance(a, SampleMatrix) else np.asarray(a, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"need a nonempty (m, d) sample, got shape {x.shape}")
    return x


def _mean_dist(a: np.ndarray, b: np.ndarray, chunk: int = 2048) -> float:
    """Mean Euclidean distance over all pairs (a_i, b_j)."""
    total = 0.0
    bb = np.sum(b * b, axis=1)
    for lo in range(0, a.shape[0], chunk):
        blk = a[lo:lo + chunk]
        d2 = np.sum(blk * blk, axis=1)[:, None] + bb[None, :] - 2.0 * blk @ b.T
        total += float(np.sqrt(np.maximum(d2, 0.0)).sum())
    return total / (a.shape[0] * b.shape[0])


def _pair_dists(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.maximum(d2, 0.0))


def energy_distance(a, b) -> float:
    """V-statistic ``2 E|A-B| - E|A-A'| - E|B-B'|`` (always >= 0)."""
    x, y = _points(a), _points(b)
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape == y.shape and np.array_equal(x, y):
        return 0.0
    e = 2.0 * _mean_dist(x, y) - _mean_dist(x, x) - _mean_dist(y, y)
    return max(e, 0.0)


def energy_null(pool, n_a: int, n_b: int, n_splits: int = 200, seed: int = 0) -> np.ndarray:
    """Energy distances between random disjoint subsets of one sample.

    Each split draws ``n_a + n_b`` rows of ``pool`` without replacement and
    compares the first ``n_a`` with the rest. The result approximates the
    statistic's distribution when both sides share a distribution.
    """
    x = _points(pool)
    if n_a < 1 or n_b < 1 or n_a + n_b > x.shape[0]:
        raise ValueError(f"cannot draw {n_a} + {n_b} rows from a pool of {x.shape[0]}")
    dist = _pair_dists(x)
    rng = np.random.Generator(np.random.Philox(seed))
    out = np.empty(n_splits)
    for k in range(n_splits):
        idx = rng.permutation(x.shape[0])[:n_a + n_b]
        ia, ib = idx[:n_a], idx[n_a:]
        ua = np.zeros(x.shape[0])
        ub = np.zeros(x.shape[0])
        ua[ia] = 1.0 / n_a
        ub[ib] = 1.0 / n_b
        dua = dist @ ua
        out[k] = 2.0 * (ub @ dua) - ua @ dua - ub @ (dist @ ub)
    return np.maximum(out, 0.0)


def energy_threshold(pool, n_a: int, n_b: int, quantile: float = 0.95,
                     n_splits: int = 200, seed: int = 0) -> float:
    return float(np.quantile(energy_null(pool, n_a, n_b, n_splits, seed), quantile))


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float | None:
        flagged = self.tp + self.fp
        return self.tp / flagged if flagged else None

    @property
    def recall(self) -> float | None:
        actual = self.tp + self.fn
        return self.tp / actual if actual else None

    @property
    def f1(self) -> float | None:
        return f1_score(self.precision, self.recall)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


def f1_score(precision: float | None, recall: float | None) -> float | None:
    """Harmonic mean; None when either input is undefined."""
    if precision is None or recall is None:
        return None
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def classification_metrics(predicted, actual, positive_label=1) -> EvalReport:
    p = np.asarray(predicted)
    a = np.asarray(actual)
    if p.shape != a.shape or p.ndim != 1:
        raise ValueError(f"predicted and actual must be equal-length vectors, got {p.shape} and {a.shape}")
    pp = p == positive_label
    ap = a == positive_label
    return EvalReport(
        tp=int(np.sum(pp & ap)),
        fp=int(np.sum(pp & ~ap)),
        fn=int(np.sum(~pp & ap)),
        tn=int(np.sum(~pp & ~ap)),
    )
