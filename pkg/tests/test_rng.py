import numpy as np
import pytest
from scipy import stats

from unbiot import rng


def test_mix_matches_splitmix64_reference():
    # first three outputs of SplitMix64 seeded with 0
    key = 0
    got = [rng.mix64(key + (c + 1) * rng.GOLDEN) for c in range(3)]
    assert got == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_vector_and_scalar_paths_agree():
    key = rng.stream_key(rng.realization_key(7, 3), rng.S_IOT)
    v = rng.uniform_at(key, np.arange(100))
    s = [rng.uniform_scalar(key, c) for c in range(100)]
    assert np.array_equal(v, s)


def test_uniform_moments_and_open_interval():
    u = rng.uniform_at(rng.realization_key(1, 0), np.arange(200_000))
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / u.size)
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_streams_are_distinct():
    rk = rng.realization_key(1, 0)
    keys = {rng.stream_key(rk, s) for s in range(512)}
    assert len(keys) == 512
    assert rng.realization_key(1, 0) != rng.realization_key(2, 0)
    assert rng.realization_key(1, 0) != rng.realization_key(1, 1)


@pytest.mark.parametrize("mean", [0.3, 4.0, 8.0])
def test_poisson_table_matches_scipy(mean):
    t = rng.poisson_cdf_table(mean)
    assert np.allclose(t, stats.poisson.cdf(np.arange(t.size), mean), rtol=0, atol=1e-13)


@pytest.mark.parametrize("mean", [2.5, 100.0, 1234.5])
def test_poisson_draws(mean):
    n = 4000
    draws = np.array([rng.CounterStream.for_realization(3, r, rng.S_BS).poisson(mean) for r in range(n)])
    assert abs(draws.mean() - mean) < 4 * np.sqrt(mean / n)
    assert draws.var() == pytest.approx(mean, rel=0.1)


def test_counter_stream_advances():
    s = rng.CounterStream(12345)
    a = s.uniform(3)
    b = s.uniform(2)
    assert np.array_equal(np.concatenate([a, b]), rng.uniform_at(12345, np.arange(5)))
    assert rng.poisson_at(1, 0.0, 5) == (0, 5)
