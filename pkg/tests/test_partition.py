from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpsummary.enc_fixed import enc_decode, enc_decrypt, enc_encode, enc_encrypt_plain
from dpsummary.fixed import FixedFormat, PlainFixed
from dpsummary.gates import CleartextBackend, keygen
from dpsummary.noise import NoiseLog, NoiseStream, ScriptedNoise, ZeroNoise
from dpsummary.oracle import brute_force_best_partition, true_cost
from dpsummary.partition import (DomainTooLarge, Partition, bucket_sums, build_cost_table,
                                 enumerate_partitions, interval_cost, intervals, noisy_bucket_sums,
                                 partition_total_cost, select_min_partition, select_partition)
from conftest import EX_BUCKETS, EX_MASK, EX_S, EX_X, FORMATS

F16 = FixedFormat(16, 8)
KEY = keygen(0)


def enc_hist(bk, x, fmt=F16):
    return [enc_encode(bk, KEY, v, fmt) for v in x]


# -- enumeration ---------------------------------------------------------------

@pytest.mark.parametrize("n", range(1, 11))
def test_enumeration_complete_and_tiling(n):
    ps = enumerate_partitions(n)
    assert len(ps) == 2 ** (n - 1)
    assert [p.cut_mask for p in ps] == list(range(2 ** (n - 1)))
    for p in ps:
        cells = [i for l, r in p.buckets for i in range(l, r + 1)]
        assert cells == list(range(1, n + 1))
        assert all(l <= r for l, r in p.buckets)
        assert p.k == len(p.buckets)


def test_enumeration_small_cases():
    assert [str(p) for p in enumerate_partitions(1)] == ["{{1}}"]
    assert [str(p) for p in enumerate_partitions(3)] == [
        "{{1,2,3}}", "{{1},{2,3}}", "{{1,2},{3}}", "{{1},{2},{3}}"]


def test_worked_example_mask():
    p = Partition.from_buckets(EX_BUCKETS)
    assert p.cut_mask == EX_MASK
    assert p in enumerate_partitions(7)
    assert p.buckets == ((1, 2), (3, 5), (6, 7))


def test_domain_limit():
    with pytest.raises(DomainTooLarge):
        enumerate_partitions(9, max_n=8)
    with pytest.raises(ValueError):
        Partition(3, 4)


def test_intervals_count():
    for n in range(1, 9):
        iv = intervals(n)
        assert len(iv) == len(set(iv)) == n * (n + 1) // 2


# -- interval costs --------------------------------------------------------------

def test_interval_cost_examples():
    bk = CleartextBackend(check_overflow=True)
    x = enc_hist(bk, EX_X)
    assert enc_decode(KEY, interval_cost(x, 4, 4)) == 0
    assert enc_decode(KEY, interval_cost(x, 1, 2)) == 1.0


# fixed-point deviation of (6, 5, 6) from an independent integer computation:
# avg_raw = (sum_raw * floor(2^F / 3)) >> F, dev = sum |x_raw - avg_raw|
@pytest.mark.parametrize("fmt,dev", [(FixedFormat(10, 2), 4.25), (FixedFormat(12, 4), 1.6875),
                                     (FixedFormat(16, 8), 1.35546875)], ids=str)
def test_interval_cost_three_values(fmt, dev):
    bk = CleartextBackend(check_overflow=True)
    assert enc_decode(KEY, interval_cost(enc_hist(bk, (6, 5, 6), fmt), 1, 3)) == dev


def test_cost_table_shape_and_zero_noise():
    bk = CleartextBackend()
    x = enc_hist(bk, (3, 2))
    table = build_cost_table(x, 0.25, ZeroNoise())
    assert sorted(table) == [(1, 1), (1, 2), (2, 2)]
    assert [enc_decode(KEY, table[k]) for k in ((1, 1), (2, 2), (1, 2))] == [0, 0, 1.0]


def test_partition_totals():
    bk = CleartextBackend()
    x = enc_hist(bk, EX_X)
    table = build_cost_table(x, 0.25, ZeroNoise())
    assert enc_decode(KEY, partition_total_cost(table, Partition(7, 0))) == enc_decode(KEY, table[(1, 7)])
    assert enc_decode(KEY, partition_total_cost(table, Partition(7, 63))) == 0
    total = partition_total_cost(table, Partition(7, EX_MASK))
    # 1.0 + 1.35546875 + 1.0 from the integer oracle above
    assert enc_decode(KEY, total) == 3.35546875


def test_noise_drawn_once_per_interval_and_bucket():
    bk = CleartextBackend()
    for n in (2, 4, 6):
        x = enc_hist(bk, range(n))
        log = NoiseLog()
        argmin = select_partition(x, 0.25, NoiseStream(n), noise_log=log)
        assert log.count("eps1") == n * (n + 1) // 2
        assert len({d.label for d in log.draws}) == n * (n + 1) // 2
        p = Partition(n, argmin.decrypt_mask(KEY))
        noisy_bucket_sums(bucket_sums(x, p), p, 0.75, NoiseStream(n), log)
        assert log.count("eps2") == p.k


# -- argmin ----------------------------------------------------------------------

def _argmin(bk, costs, n=None):
    words = [(enc_encode(bk, KEY, c, F16), m) for m, c in enumerate(costs)]
    return select_min_partition(words, n)


def test_argmin_examples():
    bk = CleartextBackend()
    res = _argmin(bk, (5.0, 3.0, 4.0), n=3)
    assert res.decrypt_mask(KEY) == 1
    assert enc_decode(KEY, res.cost) == 3.0
    assert _argmin(bk, (2.0,) * 8, n=4).decrypt_mask(KEY) == 0


def _first_min(xs):
    return min(range(len(xs)), key=lambda i: (xs[i], i))


def test_argmin_matches_brute_force_random_vectors():
    bk = CleartextBackend()
    rng = np.random.default_rng(0)
    for trial in range(1000):
        n = int(rng.integers(1, 7))
        m = 2 ** (n - 1)
        # small integer raws force plenty of ties
        raws = [int(v) for v in rng.integers(-6, 7, size=m)]
        words = [(enc_encrypt_plain(bk, KEY, PlainFixed(r, F16)), i) for i, r in enumerate(raws)]
        res = select_min_partition(words, n)
        assert res.decrypt_mask(KEY) == _first_min(raws), (trial, raws)
        assert enc_decrypt(KEY, res.cost).raw == min(raws)


@given(st.lists(st.integers(-1000, 1000), min_size=8, max_size=8))
def test_argmin_property_n4(raws):
    bk = CleartextBackend()
    words = [(enc_encrypt_plain(bk, KEY, PlainFixed(r, F16)), i) for i, r in enumerate(raws)]
    assert select_min_partition(words, 4).decrypt_mask(KEY) == _first_min(raws)


def test_argmin_gate_count_is_data_oblivious():
    counts = set()
    for costs in ((1.0,) * 8, tuple(range(8)), tuple(range(8, 0, -1))):
        bk = CleartextBackend()
        _argmin(bk, costs, n=4)
        counts.add(bk.stats.total)
    assert len(counts) == 1


# -- bucket sums -------------------------------------------------------------------

def test_bucket_sums_worked_example():
    bk = CleartextBackend()
    x = enc_hist(bk, EX_X)
    p = Partition(7, EX_MASK)
    sums = bucket_sums(x, p)
    assert tuple(enc_decode(KEY, s) for s in sums) == EX_S
    assert [enc_decode(KEY, s) for s in noisy_bucket_sums(sums, p, 0.75, ZeroNoise())] == list(EX_S)
    noise = ScriptedNoise({("eps2", 1, 2): -0.4, ("eps2", 3, 5): -0.8, ("eps2", 6, 7): 0.8})
    noisy = [enc_decode(KEY, s) for s in noisy_bucket_sums(sums, p, 0.75, noise)]
    for got, want in zip(noisy, (4.6, 16.2, 7.8)):
        assert want - F16.step < got <= want


# -- zero-noise sanity -------------------------------------------------------------

@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(x=st.lists(st.integers(0, 10), min_size=2, max_size=6))
def test_zero_noise_selects_a_true_minimum(fmt, x):
    bk = CleartextBackend()
    argmin = select_partition(enc_hist(bk, x, fmt), 0.25, ZeroNoise())
    chosen = Partition(len(x), argmin.decrypt_mask(KEY))
    _, best = brute_force_best_partition(x)
    assert true_cost(x, chosen) == best
