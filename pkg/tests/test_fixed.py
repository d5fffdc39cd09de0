from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpsummary.fixed import FixedFormat, FixedOverflowError, PlainFixed, encode
from conftest import FORMATS


def test_format_validation_and_parse():
    with pytest.raises(ValueError):
        FixedFormat(5, 4)
    assert FixedFormat.parse("16:8") == FixedFormat(16, 8)
    assert FixedFormat.parse("10(2)") == FixedFormat(10, 2)
    assert str(FixedFormat(12, 4)) == "12:4"
    f = FixedFormat(10, 2)
    assert (f.min_value, f.max_value) == (-128.0, 127.75)


@pytest.mark.parametrize("x,fmt,raw,value", [
    (2.3, FixedFormat(10, 2), 9, 2.25),
    (-0.3, FixedFormat(10, 2), -2, -0.5),
    (5.4, FixedFormat(16, 8), 1382, 5.3984375),
    (16.2, FixedFormat(16, 8), 4147, 16.19921875),
])
def test_encode_examples(x, fmt, raw, value):
    p = encode(x, fmt)
    assert (p.raw, p.value) == (raw, value)


def test_encode_out_of_range():
    fmt = FixedFormat(10, 2)
    with pytest.raises(FixedOverflowError):
        encode(128.0, fmt)
    assert encode(128.0, fmt, clamp=True).raw == fmt.max_raw
    assert encode(-1e9, fmt, clamp=True).raw == fmt.min_raw
    with pytest.raises(ValueError):
        encode(math.nan, fmt)


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(data=st.data())
def test_truncation_is_one_sided(fmt, data):
    x = data.draw(st.floats(fmt.min_value, fmt.max_value, allow_nan=False))
    v = encode(x, fmt).value
    assert v <= x < v + fmt.step


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(data=st.data())
def test_wrapping_matches_modular_arithmetic(fmt, data):
    raw = st.integers(fmt.min_raw, fmt.max_raw)
    a, b = PlainFixed(data.draw(raw), fmt), PlainFixed(data.draw(raw), fmt)
    m = 1 << fmt.total_bits
    assert (a + b).raw % m == (a.raw + b.raw) % m
    assert (a - b).raw % m == (a.raw - b.raw) % m
    assert (-a).raw % m == (-a.raw) % m
    assert PlainFixed.from_bits(a.bits(), fmt) == a


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@given(data=st.data())
def test_mul_is_floor_of_exact_product(fmt, data):
    a = PlainFixed(data.draw(st.integers(-(1 << (fmt.total_bits - 3)), 1 << (fmt.total_bits - 3))), fmt)
    c = PlainFixed(data.draw(st.integers(0, fmt.scale)), fmt)
    exact = Fraction(a.raw, fmt.scale) * Fraction(c.raw, fmt.scale)
    if fmt.in_range(math.floor(exact * fmt.scale)):
        assert a.mul(c).raw == math.floor(exact * fmt.scale)


def test_format_mismatch():
    with pytest.raises(ValueError):
        PlainFixed(1, FixedFormat(10, 2)) + PlainFixed(1, FixedFormat(16, 8))
