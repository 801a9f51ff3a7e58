import numpy as np
import pytest

from snnsketch.countmin import (
    CountMinParams,
    build_countmin_net,
    build_heavy_hitter_net,
    cm_aux_budget,
    cm_latency_budget,
)
from snnsketch.network import validate


@pytest.fixture(scope="module")
def small():
    return build_countmin_net(CountMinParams(256, 1024, 0.5, 0.25, seed=1))


def test_build_validates_within_budget(small):
    assert validate(small.net) == []
    assert small.net.aux_count() <= cm_aux_budget(small.p)


def test_parameters():
    p = CountMinParams(1024, 2000, 0.1, 0.125)
    assert p.tables == 3 and p.bins == 32 and p.key_bits == 10
    with pytest.raises(ValueError):
        CountMinParams(1, 10, 0.1, 0.1)
    with pytest.raises(ValueError):
        CountMinParams(16, 10, 1.5, 0.1)


def test_fresh_counts_are_zero(small):
    small.reseed(1)
    assert small.count(1) == 0 and small.count(200) == 0
    assert not small.tables().any()


def test_single_inc_marks_hashed_bins(small):
    small.reseed(2)
    small.inc(77)
    o = small.oracle()
    t = small.tables()
    assert t.sum() == small.p.tables
    for i, j in enumerate(o.bins(76)):
        assert t[i, j] == 1


def test_sole_item_counted_exactly(small):
    small.reseed(3)
    for _ in range(7):
        small.inc(5)
    assert small.count(5) == 7


def test_bin_exact_and_one_sided():
    cm = build_countmin_net(CountMinParams(1024, 400, 0.1, 0.125, seed=4))
    rng = np.random.default_rng(4)
    for seed in range(3):
        cm.reseed(seed)
        o = cm.oracle()
        freq = np.zeros(1025, dtype=int)
        for x in rng.integers(1, 1025, size=400):
            cm.inc(int(x))
            o.inc(int(x))
            freq[x] += 1
            assert np.array_equal(cm.tables(), o.tables)
        for x in list(rng.integers(1, 1025, size=20)) + [1, 1024]:
            c = cm.count(int(x))
            assert c == o.count(int(x)) >= freq[x]
        assert max(cm.machine.latencies) <= cm_latency_budget(cm.p)


def test_queries_are_idempotent(small):
    small.reseed(5)
    for x in [3, 3, 9, 100]:
        small.inc(x)
    before = small.tables().copy()
    assert small.count(3) == small.count(3)
    assert np.array_equal(before, small.tables())


def test_same_seed_same_export():
    p = CountMinParams(64, 100, 0.25, 0.25, seed=6)
    assert build_countmin_net(p).net.to_text() == build_countmin_net(p).net.to_text()


def test_reseed_matches_fresh_build():
    a = build_countmin_net(CountMinParams(64, 100, 0.25, 0.25, seed=0))
    a.reseed(9)
    b = build_countmin_net(CountMinParams(64, 100, 0.25, 0.25, seed=9))
    assert a.net.to_text() == b.net.to_text()


def test_contract_errors(small):
    small.reseed(0)
    with pytest.raises(ValueError):
        small.inc(0)
    with pytest.raises(ValueError):
        small.count(257)
    tiny = build_countmin_net(CountMinParams(4, 2, 0.5, 0.5))
    tiny.inc(1)
    tiny.inc(2)
    with pytest.raises(OverflowError):
        tiny.inc(3)


def test_heavy_hitter():
    hh = build_heavy_hitter_net(64, 64, 0.25, 0.25, k=2, seed=1)
    assert validate(hh.net) == []
    for _ in range(10):
        hh.inc(9)
    assert hh.heavy_hitter(9)
    assert not hh.heavy_hitter(10)
    assert hh.total_count() == 10
    with pytest.raises(RuntimeError):
        build_countmin_net(CountMinParams(16, 4, 0.5, 0.5)).heavy_hitter(1)


def test_heavy_hitter_planted_frequency():
    """Items at frequency >= m/k are reported; items below (1 - eps) m / k rarely are."""
    n, m, k, eps, delta = 64, 64, 4, 0.5, 0.25
    hh = build_heavy_hitter_net(n, m, eps, delta, k)
    rng = np.random.default_rng(7)
    trials, false_pos = 40, 0
    for seed in range(trials):
        hh.reseed(seed)
        heavy = int(rng.integers(1, n + 1))
        light = heavy % n + 1
        stream = [heavy] * (m // k) + [light] * int((1 - eps) * m / k - 1)
        stream += [int(v) for v in rng.integers(1, n + 1, size=m - len(stream))]
        rng.shuffle(stream)
        for x in stream:
            hh.inc(x)
        f_light = stream.count(light)
        assert hh.heavy_hitter(heavy)
        false_pos += hh.heavy_hitter(light) and f_light < (1 - eps) * m / k
    assert false_pos / trials <= delta + 3 * np.sqrt(delta * (1 - delta) / trials)
