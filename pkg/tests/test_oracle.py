from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpsummary.config import PipelineConfig
from dpsummary.fixed import FixedFormat
from dpsummary.noise import NoiseLog, PrivacyBudget, ZeroNoise
from dpsummary.oracle import FLOAT64, brute_force_best_partition, oracle_pipeline, true_cost
from dpsummary.partition import Partition, intervals
from dpsummary.protocol import run_pipeline
from conftest import EX_MASK, EX_X, EX_X_PRIME, FORMATS, example_config, example_noise


def test_brute_force_examples():
    assert brute_force_best_partition((4, 4, 4, 4)) == (0, 0)
    assert brute_force_best_partition((0, 10)) == (1, 0)
    assert true_cost((0, 10), Partition(2, 0)) == 10
    # no two neighbouring counts are equal, so only all-singletons costs 0
    assert brute_force_best_partition(EX_X) == (63, 0)
    with pytest.raises(ValueError):
        brute_force_best_partition([1] * 16)


def test_brute_force_with_a_real_tie():
    # {1,2},{3,4} and {1},{2},{3,4} etc.; the first zero-cost mask is 2
    assert brute_force_best_partition((1, 1, 5, 5)) == (2, 0)
    assert true_cost((1, 2, 6), Partition(3, 2)) == Fraction(1)


def test_float64_worked_example():
    run = oracle_pipeline(EX_X, example_config(), FLOAT64, noise=example_noise())
    assert run.cut_mask == EX_MASK
    assert run.s_prime_raw is None
    # 5.4 comes out as (17 - 0.8) / 3, one ulp from the decimal literal
    assert run.x_prime == pytest.approx(EX_X_PRIME, abs=1e-12)


def test_fixed_worked_example_matches_encrypted():
    cfg = example_config()
    enc = run_pipeline(cfg, noise=example_noise())
    ref = oracle_pipeline(EX_X, cfg, cfg.fmt, noise=example_noise())
    assert (enc.cut_mask, enc.s_prime_raw) == (ref.cut_mask, ref.s_prime_raw)
    assert enc.summary.x_prime == ref.x_prime


@pytest.mark.parametrize("mode", [*FORMATS, FLOAT64], ids=str)
def test_uniform_zero_noise_reproduces_input(mode):
    x = (4, 4, 4, 4, 4)
    cfg = PipelineConfig(n=5, histogram=x)
    assert oracle_pipeline(x, cfg, mode, noise=ZeroNoise()).x_prime == tuple(map(float, x))


def test_noise_labels_shared_between_modes():
    x = (1, 7, 3, 3)
    cfg = PipelineConfig(n=4, histogram=x, noise_seed=5)
    a, b = NoiseLog(), NoiseLog()
    oracle_pipeline(x, cfg, FixedFormat(16, 8), noise_log=a)
    oracle_pipeline(x, cfg, FLOAT64, noise_log=b)
    eps1 = lambda log: [(d.label, d.sample) for d in log.draws if d.phase == "eps1"]
    assert eps1(a) == eps1(b)
    assert [d.label for d in a.draws][:len(intervals(4))] == [("eps1", l, r) for l, r in intervals(4)]


def test_length_mismatch():
    with pytest.raises(ValueError):
        oracle_pipeline((1, 2), PipelineConfig(n=3), FLOAT64)


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(x=st.lists(st.integers(0, 10), min_size=1, max_size=7))
def test_zero_noise_cost_within_truncation_bound(fmt, x):
    n = len(x)
    cfg = PipelineConfig(n=n, histogram=tuple(x), budget=PrivacyBudget.split(), max_n=12)
    run = oracle_pipeline(x, cfg, fmt, noise=ZeroNoise())
    _, best = brute_force_best_partition(x)
    bound = Fraction(n * n, fmt.scale)  # n * 2^-F per interval, at most n intervals
    assert true_cost(x, Partition(n, run.cut_mask)) - best <= bound
