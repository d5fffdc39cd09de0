"""Fixed-point arithmetic circuits over encrypted bit vectors.

Words are little-endian two's-complement vectors of :class:`EncBit`. Every
circuit here is data-oblivious: the gates issued depend only on the format,
the operand count and public plaintext constants, never on encrypted values.
Circuit choices: ripple-carry adders, a sign-extended borrow chain for
comparison, conditional negation for absolute value and shift-and-add for
multiplication by a public constant.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from .fixed import FixedFormat, FixedOverflowError, PlainFixed, encode
from .gates import CleartextBackend, EncBit, SecretKey


class FormatMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EncWord:
    bits: tuple[EncBit, ...]
    fmt: FixedFormat

    def __post_init__(self):
        if len(self.bits) != self.fmt.total_bits:
            raise ValueError(f"word has {len(self.bits)} bits, format {self.fmt} needs {self.fmt.total_bits}")
        backend = self.bits[0].backend
        if any(b.backend is not backend for b in self.bits):
            raise ValueError("word mixes bits from several backends")

    @property
    def backend(self) -> CleartextBackend:
        return self.bits[0].backend

    @property
    def sign(self) -> EncBit:
        return self.bits[-1]

    def digest(self) -> str:
        """Stable fingerprint of the ciphertext, used by transcripts and capability tokens."""
        h = hashlib.sha256(str(self.fmt).encode())
        for b in self.bits:
            h.update(f"{b.key_id or '-'}:{b.bit};".encode())
        return h.hexdigest()


def words_digest(words: Sequence[EncWord]) -> str:
    h = hashlib.sha256()
    for w in words:
        h.update(w.digest().encode())
    return h.hexdigest()


# -- encoding ------------------------------------------------------------------

def enc_encrypt_plain(backend: CleartextBackend, key: SecretKey, p: PlainFixed) -> EncWord:
    return EncWord(tuple(backend.encrypt(key, b) for b in p.bits()), p.fmt)


def enc_trivial_plain(backend: CleartextBackend, p: PlainFixed) -> EncWord:
    return EncWord(tuple(backend.trivial(b) for b in p.bits()), p.fmt)


def enc_encode(backend: CleartextBackend, key: SecretKey, x: float, fmt: FixedFormat) -> EncWord:
    return enc_encrypt_plain(backend, key, encode(x, fmt))


def enc_encode_trivial(backend: CleartextBackend, x: float, fmt: FixedFormat) -> EncWord:
    """Key-less public encoding of ``x``; usable by a server without the key."""
    return enc_trivial_plain(backend, encode(x, fmt))


def enc_decrypt(key: SecretKey, w: EncWord) -> PlainFixed:
    backend = w.backend
    return PlainFixed.from_bits([backend.decrypt(key, b) for b in w.bits], w.fmt)


def enc_decode(key: SecretKey, w: EncWord) -> float:
    return enc_decrypt(key, w).value


def _peek(w: EncWord) -> PlainFixed:
    return PlainFixed.from_bits([w.backend.peek(b) for b in w.bits], w.fmt)


def _check_same(a: EncWord, b: EncWord) -> None:
    if a.fmt != b.fmt:
        raise FormatMismatch(f"{a.fmt} vs {b.fmt}")


# -- bit-level building blocks -------------------------------------------------

def _ripple_add(bk: CleartextBackend, xs: Sequence[EncBit], ys: Sequence[EncBit],
                carry: EncBit | None = None) -> list[EncBit]:
    """Sum of two equal-length bit vectors modulo 2**len; carry-in ``None`` means 0."""
    out = []
    last = len(xs) - 1
    for i, (x, y) in enumerate(zip(xs, ys)):
        t = bk.xor(x, y)
        if carry is None:
            out.append(t)
            if i != last:
                carry = bk.and_(x, y)
        else:
            out.append(bk.xor(t, carry))
            if i != last:
                carry = bk.or_(bk.and_(x, y), bk.and_(carry, t))
    return out


def _negate_bits(bk: CleartextBackend, xs: Sequence[EncBit]) -> list[EncBit]:
    inv = [bk.not_(x) for x in xs]
    # +1: the lowest bit of ~x + 1 is x itself and the carry out is ~x[0]
    out = [xs[0]]
    carry = inv[0]
    last = len(xs) - 1
    for i in range(1, len(xs)):
        out.append(bk.xor(inv[i], carry))
        if i != last:
            carry = bk.and_(inv[i], carry)
    return out


# -- word operations -----------------------------------------------------------

def enc_add(a: EncWord, b: EncWord) -> EncWord:
    _check_same(a, b)
    bk = a.backend
    out = EncWord(tuple(_ripple_add(bk, a.bits, b.bits)), a.fmt)
    if bk.check_overflow:
        exact = _peek(a).raw + _peek(b).raw
        if not a.fmt.in_range(exact):
            raise FixedOverflowError(f"enc_add overflow in {a.fmt}")
    return out


def enc_neg(a: EncWord) -> EncWord:
    bk = a.backend
    out = EncWord(tuple(_negate_bits(bk, a.bits)), a.fmt)
    if bk.check_overflow and _peek(a).raw == a.fmt.min_raw:
        raise FixedOverflowError(f"enc_neg of the most negative word in {a.fmt}")
    return out


def enc_sub(a: EncWord, b: EncWord) -> EncWord:
    _check_same(a, b)
    bk = a.backend
    nb = [bk.not_(x) for x in b.bits]
    out = EncWord(tuple(_ripple_add(bk, a.bits, nb, carry=bk.trivial(1))), a.fmt)
    if bk.check_overflow:
        exact = _peek(a).raw - _peek(b).raw
        if not a.fmt.in_range(exact):
            raise FixedOverflowError(f"enc_sub overflow in {a.fmt}")
    return out


def enc_select(sel: EncBit, a: EncWord, b: EncWord) -> EncWord:
    """Bitwise multiplexer: ``a`` where ``sel`` is 1, otherwise ``b``."""
    _check_same(a, b)
    bk = a.backend
    return EncWord(tuple(bk.mux(sel, x, y) for x, y in zip(a.bits, b.bits)), a.fmt)


def enc_abs(a: EncWord) -> EncWord:
    if a.backend.check_overflow and _peek(a).raw == a.fmt.min_raw:
        raise FixedOverflowError(f"enc_abs of the most negative word in {a.fmt}")
    neg = EncWord(tuple(_negate_bits(a.backend, a.bits)), a.fmt)
    return enc_select(a.sign, neg, a)


def enc_lt(a: EncWord, b: EncWord) -> EncBit:
    """Encrypted ``a < b`` (signed).

    Evaluates the carry chain of ``a + ~b + 1`` on operands sign-extended by one
    bit, so the sign of the difference is exact even where the T-bit
    subtraction would overflow.
    """
    _check_same(a, b)
    bk = a.backend
    nb = [bk.not_(y) for y in b.bits]
    carry = bk.trivial(1)
    for x, y in zip(a.bits, nb):
        # majority(x, y, carry)
        xc = bk.xor(x, carry)
        carry = bk.xor(bk.and_(xc, bk.xor(y, carry)), carry)
    # extension bit: sign(a) ^ ~sign(b) ^ carry
    return bk.xor(bk.xor(a.sign, nb[-1]), carry)


def enc_min(a: EncWord, b: EncWord) -> EncWord:
    return enc_select(enc_lt(a, b), a, b)


def enc_mul_plain(a: EncWord, c: PlainFixed) -> EncWord:
    """Multiply by a public constant and truncate (floor) back to the format.

    Shift-and-add over the set bits of ``c`` in a ``T + F`` bit accumulator;
    the low ``T + F`` bits of the double-width product are all that the
    truncated result depends on.
    """
    fmt = a.fmt
    if c.fmt != fmt:
        raise FormatMismatch(f"{fmt} vs {c.fmt}")
    bk = a.backend
    T, F = fmt.total_bits, fmt.frac_bits
    width = T + F
    ext = list(a.bits) + [a.sign] * F
    c_bits = (c.raw & ((1 << width) - 1))
    zero = bk.trivial(0)
    acc: list[EncBit] | None = None
    for j in range(width):
        if not (c_bits >> j) & 1:
            continue
        shifted = ext[: width - j]
        if acc is None:
            acc = [zero] * j + shifted
        else:
            acc = acc[:j] + _ripple_add(bk, acc[j:], shifted)
    if acc is None:
        acc = [zero] * width
    out = EncWord(tuple(acc[F:F + T]), fmt)
    if bk.check_overflow:
        exact = (_peek(a).raw * c.raw) >> F
        if not fmt.in_range(exact):
            raise FixedOverflowError(f"enc_mul_plain overflow in {fmt}")
    return out


def enc_sum(words: Sequence[EncWord]) -> EncWord:
    """Left fold of :func:`enc_add` in list order."""
    if not words:
        raise ValueError("enc_sum of an empty list")
    total = words[0]
    for w in words[1:]:
        total = enc_add(total, w)
    return total
