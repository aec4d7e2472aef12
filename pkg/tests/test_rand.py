import numpy as np
import pytest
from scipy import stats

from phidetect import RNG_ID, replicate_rng, stable_seed, uniform_open


def test_rng_id_pins_the_scheme():
    assert RNG_ID == "philox4x64-counter128-v1"


def test_replicate_streams_deterministic():
    a = replicate_rng(123, 7).random(100)
    b = replicate_rng(123, 7).random(100)
    np.testing.assert_array_equal(a, b)


def test_replicate_streams_do_not_overlap():
    # the substream is a property of (seed, replicate) alone, not of how much
    # any other replicate has consumed
    replicate_rng(5, 0).random(100_000)
    fresh = replicate_rng(5, 1).random(50)
    np.testing.assert_array_equal(fresh, replicate_rng(5, 1).random(50))
    firsts = [replicate_rng(5, j).random() for j in range(50)]
    assert len(set(firsts)) == 50


def test_replicate_index_validation():
    with pytest.raises(ValueError):
        replicate_rng(1, -1)


def test_uniform_open_is_strictly_interior():
    u = uniform_open(replicate_rng(9, 0), 200_000)
    assert u.min() > 0.0
    assert u.max() < 1.0
    # draws live on the dyadic grid k / 2^53
    k = u * float(1 << 53)
    np.testing.assert_array_equal(k, np.round(k))


def test_uniform_open_is_uniform():
    u = uniform_open(replicate_rng(10, 0), 20_000)
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_stable_seed_is_63_bit_and_frozen():
    for parts in ((0, "calibration-tables"), (1,), ("x", 2.5, 3)):
        v = stable_seed(*parts)
        assert 0 <= v < 1 << 63
        assert v == stable_seed(*parts)
    # frozen values: changing the hashing scheme would silently invalidate
    # every cached calibration table, so lock it down
    assert stable_seed(0, "calibration-tables") == 1439588969303034885
    assert stable_seed(42, "normal", 0.6, 0.5, 2.0, 100_000) == 728768595043116504


def test_stable_seed_distinguishes_types_and_order():
    assert len({stable_seed(1), stable_seed(1.0), stable_seed("1")}) == 3
    assert stable_seed("a", "b") != stable_seed("b", "a")
    assert stable_seed(3, 4) != stable_seed(34)
