import numpy as np
import pytest
from scipy import stats

from ou_diffuse.rng import NormalStreams, thread_count


def test_deterministic():
    a = NormalStreams(3).normal(np.arange(100), 5, 4)
    b = NormalStreams(3).normal(np.arange(100), 5, 4)
    assert np.array_equal(a, b)


def test_seed_and_stream_and_counter_change_output():
    r = NormalStreams(3)
    base = r.normal(np.arange(10), 0, 2)
    assert not np.array_equal(base, NormalStreams(4).normal(np.arange(10), 0, 2))
    assert not np.array_equal(base, r.normal(np.arange(10), 1, 2))
    assert not np.array_equal(base, r.normal(np.arange(1, 11), 0, 2))


def test_stream_value_independent_of_batch():
    r = NormalStreams(11)
    big = r.normal(np.arange(1000), 7, 3)
    assert np.array_equal(big[517], r.normal(517, 7, 3))
    assert np.array_equal(big[[3, 900]], r.normal(np.array([3, 900]), 7, 3))


@pytest.mark.parametrize("dim", [1, 2, 3, 5])
def test_block_equals_single_draws(dim):
    r = NormalStreams(2)
    ids = np.arange(20)
    blk = r.normal_block(ids, 3, 6, dim)
    single = np.stack([r.normal(ids, c, dim) for c in range(3, 9)], axis=1)
    assert np.array_equal(blk, single)


def test_marginal_is_standard_normal():
    z = NormalStreams(0).normal_block(np.arange(200_000), 0, 2, 1).ravel()
    se = 1 / np.sqrt(z.size)
    assert abs(z.mean()) < 5 * se
    assert abs(z.var() - 1) < 5 * np.sqrt(2) * se
    assert abs(stats.skew(z)) < 5 * np.sqrt(6) * se
    assert abs(stats.kurtosis(z)) < 5 * np.sqrt(24) * se
    assert stats.kstest(z, "norm").pvalue > 1e-4


def test_no_correlation_between_neighbours():
    z = NormalStreams(1).normal_block(np.arange(100_000), 0, 3, 2)
    flat = z.reshape(z.shape[0], -1)
    c = np.corrcoef(flat.T)
    off = c[~np.eye(c.shape[0], dtype=bool)]
    assert np.max(np.abs(off)) < 5 / np.sqrt(z.shape[0])
    # adjacent streams
    assert abs(np.corrcoef(flat[1:, 0], flat[:-1, 0])[0, 1]) < 5 / np.sqrt(z.shape[0])
    # squares catch the cosine/sine pairing of Box-Muller
    sq = np.corrcoef(flat[:, 0] ** 2, flat[:, 1] ** 2)[0, 1]
    assert abs(sq) < 5 / np.sqrt(z.shape[0])


@pytest.mark.parametrize("bad", [-1, 1.5, True])
def test_bad_seed(bad):
    with pytest.raises(ValueError):
        NormalStreams(bad)


def test_bad_arguments():
    r = NormalStreams(0)
    with pytest.raises(ValueError):
        r.normal(np.array([-1]), 0, 1)
    with pytest.raises(ValueError):
        r.normal(0, -1, 1)
    with pytest.raises(ValueError):
        r.normal(0, 0, 0)


def test_thread_count(monkeypatch):
    monkeypatch.delenv("OU_DIFFUSE_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("OU_DIFFUSE_THREADS", "4")
    assert thread_count() == 4
    monkeypatch.setenv("OU_DIFFUSE_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("OU_DIFFUSE_THREADS", "many")
    with pytest.raises(ValueError):
        thread_count()
