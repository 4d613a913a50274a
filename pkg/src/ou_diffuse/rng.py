"""Counter-based standard-normal streams.

Every variate is a pure function of ``(seed, stream, counter, coordinate)``:
the seed and stream id are hashed with the SplitMix64 finalizer into a
stream key, and ``stream key + position`` is hashed again into a pair of
53-bit uniforms, which the Box-Muller transform turns into two normals
(cosine branch for even positions, sine branch for odd ones).

Because nothing is carried between calls, stream ``k`` produces the same
numbers regardless of how many other streams are drawn alongside it, or in
which order batches are evaluated.
"""

from __future__ import annotations

import os

import numpy as np

ALGORITHM = "splitmix64-counter-boxmuller-v1"

_M64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM_MUL = np.uint64(0xD1B54A32D192ED03)
_COUNTER_MUL = np.uint64(0xAEF17502108EF2D9)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG53 = 2.0 ** -53


def _mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer; overwrites and returns ``z`` when it is an array."""
    z = np.asarray(z, dtype=np.uint64)
    if z.ndim == 0:
        z = z.reshape(1)
    tmp = np.empty_like(z)
    for shift, mul in ((30, _MIX1), (27, _MIX2)):
        np.right_shift(z, np.uint64(shift), out=tmp)
        z ^= tmp
        z *= mul
    np.right_shift(z, np.uint64(31), out=tmp)
    z ^= tmp
    return z


def _seed_key(seed: int) -> np.uint64:
    if isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed!r}")
    with np.errstate(over="ignore"):
        return _mix(np.array([int(seed) & _M64], dtype=np.uint64) + _GOLDEN)[0]


class NormalStreams:
    """Family of independent standard-normal streams under one seed.

    Within a stream the variates form one flat sequence; the draw for
    ``(counter, coordinate)`` of a ``dim``-dimensional request sits at
    position ``counter * dim + coordinate``. Positions ``2q`` and ``2q + 1``
    share the uniform pair ``q`` (cosine and sine branch respectively).
    """

    algorithm = ALGORITHM

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._key = _seed_key(seed)

    def __repr__(self):
        return f"NormalStreams(seed={self.seed})"

    def _pairs(self, ids: np.ndarray, q0: int, n_pairs: int):
        s = ids.astype(np.uint64)[:, None]
        q = np.arange(q0, q0 + n_pairs, dtype=np.uint64)[None, :]
        with np.errstate(over="ignore"):
            kstream = _mix(self._key ^ (s * _STREAM_MUL + _GOLDEN))
            c = np.uint64(2) * q * _COUNTER_MUL
            h1 = kstream + c
            h2 = _mix(h1 + _COUNTER_MUL)
            h1 = _mix(h1)
        # u1 in (0, 1] keeps log finite; u2 in [0, 1)
        u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_NEG53
        u2 = (h2 >> np.uint64(11)).astype(np.float64) * _TWO_NEG53
        return u1, u2

    def normal_block(self, streams, counter: int, n_counters: int, dim: int) -> np.ndarray:
        """Draws for counters ``counter .. counter + n_counters - 1``.

        Returns shape ``(len(streams), n_counters, dim)``; identical to
        stacking ``normal(streams, c, dim)`` over the counters, but each
        Box-Muller evaluation is used for two variates.
        """
        if dim < 1 or n_counters < 1:
            raise ValueError(f"dim and n_counters must be >= 1, got {dim}, {n_counters}")
        if counter < 0:
            raise ValueError(f"counter must be >= 0, got {counter}")
        ids = np.atleast_1d(np.asarray(streams, dtype=np.int64))
        if ids.ndim != 1:
            raise ValueError("streams must be a scalar or 1-d array of ids")
        if np.any(ids < 0):
            raise ValueError("stream ids must be nonnegative")
        first = int(counter) * dim
        stop = first + n_counters * dim
        q0 = first // 2
        n_pairs = (stop + 1) // 2 - q0
        u1, u2 = self._pairs(ids, q0, n_pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty((ids.size, 2 * n_pairs))
        z[:, 0::2] = r * np.cos(theta)
        z[:, 1::2] = r * np.sin(theta)
        lo = first - 2 * q0
        return z[:, lo:lo + n_counters * dim].reshape(ids.size, n_counters, dim)

    def normal(self, streams, counter: int, dim: int) -> np.ndarray:
        """Standard normals of shape ``(len(streams), dim)``.

        A scalar stream id gives shape ``(dim,)``.
        """
        z = self.normal_block(streams, counter, 1, dim)[:, 0, :]
        return z[0] if np.ndim(streams) == 0 else z


def thread_count(default: int = 1) -> int:
    """Worker cap from ``OU_DIFFUSE_THREADS`` (falls back to ``default``)."""
    raw = os.environ.get("OU_DIFFUSE_THREADS")
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"OU_DIFFUSE_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)
