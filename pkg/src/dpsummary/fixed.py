"""Plaintext two's-complement fixed-point numbers.

``PlainFixed`` mirrors the encrypted word circuits in :mod:`dpsummary.enc_fixed`
on Python integers. Arithmetic wraps modulo ``2**T`` exactly as a ripple-carry
circuit does; precision is lost only by truncation (floor on the raw scale).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property


class FixedOverflowError(OverflowError):
    """A value does not fit the fixed-point format."""


@dataclass(frozen=True)
class FixedFormat:
    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.frac_bits < 0:
            raise ValueError("frac_bits must be non-negative")
        if self.total_bits < self.frac_bits + 2:
            raise ValueError(
                f"need at least one integer bit and a sign bit: T={self.total_bits}, F={self.frac_bits}"
            )

    @classmethod
    def parse(cls, text: str) -> FixedFormat:
        """Parse ``"T:F"`` (or ``"T(F)"``)."""
        cleaned = text.strip().replace("(", ":").rstrip(")")
        total, _, frac = cleaned.partition(":")
        if not frac:
            raise ValueError(f"expected T:F, got {text!r}")
        return cls(int(total), int(frac))

    @cached_property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def step(self) -> float:
        return 1.0 / self.scale

    @cached_property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1))

    @cached_property
    def max_raw(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return self.min_raw / self.scale

    @property
    def max_value(self) -> float:
        return self.max_raw / self.scale

    def wrap(self, raw: int) -> int:
        """Reduce an integer to the signed T-bit range (two's-complement wrap)."""
        mask = (1 << self.total_bits) - 1
        raw &= mask
        if raw >> (self.total_bits - 1):
            raw -= 1 << self.total_bits
        return raw

    def in_range(self, raw: int) -> bool:
        return self.min_raw <= raw <= self.max_raw

    def __str__(self) -> str:
        return f"{self.total_bits}:{self.frac_bits}"


@dataclass(frozen=True)
class PlainFixed:
    raw: int
    fmt: FixedFormat

    def __post_init__(self):
        if not self.fmt.in_range(self.raw):
            raise FixedOverflowError(f"raw {self.raw} outside {self.fmt}")

    @property
    def value(self) -> float:
        return self.raw / self.fmt.scale

    def _same(self, other: PlainFixed) -> None:
        if other.fmt != self.fmt:
            raise ValueError(f"format mismatch: {self.fmt} vs {other.fmt}")

    def _wrapped(self, raw: int) -> PlainFixed:
        return PlainFixed(self.fmt.wrap(raw), self.fmt)

    def __add__(self, other: PlainFixed) -> PlainFixed:
        self._same(other)
        return self._wrapped(self.raw + other.raw)

    def __neg__(self) -> PlainFixed:
        return self._wrapped(-self.raw)

    def __sub__(self, other: PlainFixed) -> PlainFixed:
        self._same(other)
        return self._wrapped(self.raw - other.raw)

    def __abs__(self) -> PlainFixed:
        return -self if self.raw < 0 else self

    def __lt__(self, other: PlainFixed) -> bool:
        self._same(other)
        return self.raw < other.raw

    def __le__(self, other: PlainFixed) -> bool:
        self._same(other)
        return self.raw <= other.raw

    def min(self, other: PlainFixed) -> PlainFixed:
        return self if self < other else other

    def mul(self, other: PlainFixed) -> PlainFixed:
        """Product truncated back to the format (floor of the exact product)."""
        self._same(other)
        return self._wrapped((self.raw * other.raw) >> self.fmt.frac_bits)

    def bits(self) -> list[int]:
        """Little-endian two's-complement bits."""
        u = self.raw & ((1 << self.fmt.total_bits) - 1)
        return [(u >> i) & 1 for i in range(self.fmt.total_bits)]

    @classmethod
    def from_bits(cls, bits, fmt: FixedFormat) -> PlainFixed:
        if len(bits) != fmt.total_bits:
            raise ValueError(f"expected {fmt.total_bits} bits, got {len(bits)}")
        u = sum(int(b) << i for i, b in enumerate(bits))
        return cls(fmt.wrap(u), fmt)

    @classmethod
    def zero(cls, fmt: FixedFormat) -> PlainFixed:
        return cls(0, fmt)


def encode(x: float, fmt: FixedFormat, *, clamp: bool = False) -> PlainFixed:
    """Truncating encoder: ``raw = floor(x * 2**F)``.

    Out-of-range inputs raise :class:`FixedOverflowError` unless ``clamp`` is
    set, in which case they saturate at the format extremes.
    """
    if math.isnan(x):
        raise ValueError("cannot encode NaN")
    if math.isinf(x):
        if not clamp:
            raise FixedOverflowError(f"{x} is not representable in {fmt}")
        return PlainFixed(fmt.max_raw if x > 0 else fmt.min_raw, fmt)
    # scaling by a power of two is exact in binary floating point
    raw = math.floor(x * fmt.scale)
    if not fmt.in_range(raw):
        if not clamp:
            raise FixedOverflowError(f"{x} is not representable in {fmt}")
        raw = min(max(raw, fmt.min_raw), fmt.max_raw)
    return PlainFixed(raw, fmt)
