from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpsummary.bench import affine_fit
from dpsummary.enc_fixed import (FormatMismatch, enc_abs, enc_add, enc_decode, enc_decrypt, enc_encode,
                                 enc_encode_trivial, enc_encrypt_plain, enc_lt, enc_min, enc_mul_plain,
                                 enc_neg, enc_select, enc_sub, enc_sum)
from dpsummary.fixed import FixedFormat, FixedOverflowError, PlainFixed, encode
from dpsummary.gates import CleartextBackend, keygen
from conftest import FORMATS

F16 = FixedFormat(16, 8)
KEY = keygen(0)


@pytest.fixture
def bk():
    return CleartextBackend(check_overflow=True)


def E(bk, x, fmt=F16):
    return enc_encode(bk, KEY, x, fmt)


def D(w):
    return enc_decode(KEY, w)


def test_encode_round_trips(bk):
    assert D(E(bk, 3.0)) == 3.0
    assert D(E(bk, 16.2)) == 16.19921875
    assert enc_decode(keygen(7), enc_encode_trivial(bk, 0, F16)) == 0.0


def test_arithmetic_examples(bk):
    assert D(enc_add(E(bk, 3), E(bk, 2))) == 5
    assert D(enc_neg(E(bk, 0))) == 0
    assert D(enc_sub(E(bk, 5), E(bk, 17))) == -12
    assert D(enc_abs(E(bk, -3.5))) == 3.5
    assert D(enc_abs(E(bk, 0))) == 0
    assert D(enc_abs(enc_sub(E(bk, 2), E(bk, 2.5)))) == 0.5
    assert bk.decrypt(KEY, enc_lt(E(bk, 5), E(bk, 17))) == 1
    assert bk.decrypt(KEY, enc_lt(E(bk, 17), E(bk, 5))) == 0
    assert D(enc_min(E(bk, 7), E(bk, 7))) == 7


def test_mul_plain_examples(bk):
    # 17 * floor(256/3) / 256, floor-truncated: 1445/256
    assert D(enc_mul_plain(E(bk, 17), encode(1 / 3, F16))) == 5.64453125
    for x in (0, 3.25, -7.5, 100):
        assert D(enc_mul_plain(E(bk, x), encode(1, F16))) == x
        assert D(enc_mul_plain(E(bk, x), encode(0, F16))) == 0


def test_sum_examples(bk):
    assert D(enc_sum([E(bk, 6), E(bk, 5), E(bk, 6)])) == 17
    assert D(enc_sum([E(bk, 0)])) == 0
    vals = np.random.default_rng(3).integers(0, 11, size=8)
    assert D(enc_sum([E(bk, int(v)) for v in vals])) == int(vals.sum())
    with pytest.raises(ValueError):
        enc_sum([])


def test_min_over_all_pairs(bk):
    vals = [-2.5, 0, 3.75, 3.75]
    for a, b in itertools.product(vals, repeat=2):
        assert D(enc_min(E(bk, a), E(bk, b))) == min(a, b)


def test_select(bk):
    a, b = E(bk, 1.5), E(bk, -4)
    assert D(enc_select(bk.encrypt(KEY, 1), a, b)) == 1.5
    assert D(enc_select(bk.encrypt(KEY, 0), a, b)) == -4


def test_format_mismatch(bk):
    with pytest.raises(FormatMismatch):
        enc_add(E(bk, 1), E(bk, 1, FixedFormat(10, 2)))


def test_debug_overflow_checks(bk):
    fmt = FixedFormat(10, 2)
    with pytest.raises(FixedOverflowError):
        enc_add(E(bk, 100, fmt), E(bk, 100, fmt))
    with pytest.raises(FixedOverflowError):
        enc_abs(enc_encrypt_plain(bk, KEY, PlainFixed(fmt.min_raw, fmt)))
    # without debug checks the circuit wraps silently
    quiet = CleartextBackend()
    w = enc_add(enc_encode(quiet, KEY, 100, fmt), enc_encode(quiet, KEY, 100, fmt))
    assert enc_decode(KEY, w) == 200 - 256


# -- oracle equivalence --------------------------------------------------------

def _raw(fmt, frac=1):
    lim = 1 << (fmt.total_bits - 1 - frac)
    return st.integers(-lim, lim - 1)


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(data=st.data())
def test_ops_match_plain_oracle(fmt, data):
    bk = CleartextBackend()
    a = PlainFixed(data.draw(_raw(fmt)), fmt)
    b = PlainFixed(data.draw(_raw(fmt)), fmt)
    ea, eb = enc_encrypt_plain(bk, KEY, a), enc_encrypt_plain(bk, KEY, b)
    assert enc_decrypt(KEY, enc_add(ea, eb)) == a + b
    assert enc_decrypt(KEY, enc_sub(ea, eb)) == a - b
    assert enc_decrypt(KEY, enc_neg(ea)) == -a
    assert enc_decrypt(KEY, enc_abs(ea)) == abs(a)
    assert enc_decrypt(KEY, enc_min(ea, eb)) == a.min(b)
    assert bk.decrypt(KEY, enc_lt(ea, eb)) == int(a < b)


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(data=st.data())
def test_lt_exact_over_full_range(fmt, data):
    # the comparator must not be fooled by subtraction overflow
    raw = st.integers(fmt.min_raw, fmt.max_raw)
    a, b = PlainFixed(data.draw(raw), fmt), PlainFixed(data.draw(raw), fmt)
    bk = CleartextBackend()
    assert bk.decrypt(KEY, enc_lt(enc_encrypt_plain(bk, KEY, a), enc_encrypt_plain(bk, KEY, b))) == int(a < b)


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(data=st.data())
def test_mul_plain_matches_oracle(fmt, data):
    bk = CleartextBackend()
    a = PlainFixed(data.draw(_raw(fmt, frac=fmt.frac_bits + 1)), fmt)
    c = PlainFixed(data.draw(st.integers(-fmt.scale, fmt.scale)), fmt)
    assert enc_decrypt(KEY, enc_mul_plain(enc_encrypt_plain(bk, KEY, a), c)) == a.mul(c)


@given(vals=st.lists(st.integers(0, 10), min_size=1, max_size=10))
def test_sum_matches_oracle(vals):
    bk = CleartextBackend()
    ps = [encode(v, F16) for v in vals]
    total = ps[0]
    for p in ps[1:]:
        total = total + p
    assert enc_decrypt(KEY, enc_sum([enc_encrypt_plain(bk, KEY, p) for p in ps])) == total


# -- gate counts -----------------------------------------------------------------

def _count(op, fmt, values):
    bk = CleartextBackend()
    ws = [enc_encode(bk, KEY, v, fmt) for v in values]
    op(*ws)
    return bk.stats.total


OPS = {
    "add": (enc_add, 2),
    "sub": (enc_sub, 2),
    "abs": (enc_abs, 1),
    "lt": (enc_lt, 2),
    "min": (enc_min, 2),
}


@pytest.mark.parametrize("name", sorted(OPS))
@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(data=st.data())
def test_gate_count_is_value_independent(name, fmt, data):
    op, arity = OPS[name]
    vals = [data.draw(st.integers(-50, 50)) / 4 for _ in range(arity)]
    ref = _count(op, fmt, [0] * arity)
    assert _count(op, fmt, vals) == ref


@pytest.mark.parametrize("name", ["add", "abs", "lt", "min"])
def test_gate_count_affine_in_T(name):
    op, arity = OPS[name]
    Ts = [10, 12, 16]
    counts = [_count(op, FixedFormat(T, 2), [1] * arity) for T in Ts]
    _, _, resid = affine_fit(Ts, counts)
    assert resid < 1e-9
    assert counts[0] < counts[1] < counts[2]


def test_adder_gate_formula():
    for T in (10, 12, 16):
        assert _count(enc_add, FixedFormat(T, 2), [1, 2]) == 5 * T - 6
