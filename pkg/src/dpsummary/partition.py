"""Data-aware partitioning of an encrypted histogram.

A partition of domains ``1..n`` into contiguous buckets is identified by its
cut mask: bit ``i - 1`` is set when a bucket boundary falls between domains
``i`` and ``i + 1``. Both servers share this convention, so a decrypted mask
fully determines the buckets.

The selection is exhaustive. Every contiguous interval gets a noisy deviation
cost (one Laplace draw per interval), every candidate partition sums the costs
of its buckets, and a comparator tournament picks the cheapest candidate while
carrying its mask along as trivially encrypted bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .enc_fixed import (EncWord, enc_abs, enc_lt, enc_mul_plain, enc_select, enc_sub,
                        enc_sum, words_digest)
from .fixed import encode
from .gates import EncBit, SecretKey
from .noise import LaplaceParams, NoiseLog, NoiseSource, add_noise_enc

MAX_PLAIN_N = 12
MAX_ENCRYPTED_N = 8
DEFAULT_COST_SENSITIVITY = 2.0

COST_PHASE = "eps1"
SUM_PHASE = "eps2"


class DomainTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    n: int
    cut_mask: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 <= self.cut_mask < (1 << (self.n - 1)):
            raise ValueError(f"cut mask {self.cut_mask} invalid for n={self.n}")

    @cached_property
    def buckets(self) -> tuple[tuple[int, int], ...]:
        """Buckets as inclusive 1-based ``(l, r)`` intervals, left to right."""
        out = []
        start = 1
        for i in range(1, self.n):
            if (self.cut_mask >> (i - 1)) & 1:
                out.append((start, i))
                start = i + 1
        out.append((start, self.n))
        return tuple(out)

    @property
    def k(self) -> int:
        return bin(self.cut_mask).count("1") + 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(r - l + 1 for l, r in self.buckets)

    @classmethod
    def from_buckets(cls, buckets: Sequence[Sequence[int]]) -> Partition:
        """Build from explicit domain sets such as ``[[1, 2], [3, 4, 5], [6, 7]]``."""
        mask = 0
        expected = 1
        for bucket in buckets:
            if list(bucket) != list(range(expected, expected + len(bucket))) or not bucket:
                raise ValueError(f"buckets must be contiguous, ordered and nonempty: {buckets}")
            expected += len(bucket)
            mask |= 1 << (expected - 2)
        n = expected - 1
        mask &= (1 << (n - 1)) - 1  # the last bucket closes at n, not a cut
        return cls(n, mask)

    def __str__(self) -> str:
        return "{" + ",".join("{" + ",".join(map(str, range(l, r + 1))) + "}"
                              for l, r in self.buckets) + "}"


def enumerate_partitions(n: int, max_n: int = MAX_PLAIN_N) -> list[Partition]:
    """All ``2**(n-1)`` partitions in ascending cut-mask order."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > max_n:
        raise DomainTooLarge(f"n={n} exceeds the configured limit of {max_n} "
                             f"({1 << (n - 1)} candidate partitions)")
    return [Partition(n, m) for m in range(1 << (n - 1))]


def intervals(n: int) -> list[tuple[int, int]]:
    """All contiguous intervals, shortest first, then left to right."""
    return [(l, l + length - 1) for length in range(1, n + 1) for l in range(1, n - length + 2)]


def interval_cost(enc_x: Sequence[EncWord], l: int, r: int) -> EncWord:
    """L1 deviation of ``x[l..r]`` from its (truncated) mean."""
    if not 1 <= l <= r <= len(enc_x):
        raise ValueError(f"bad interval ({l}, {r}) for n={len(enc_x)}")
    xs = enc_x[l - 1:r]
    fmt = xs[0].fmt
    avg = enc_mul_plain(enc_sum(xs), encode(1.0 / len(xs), fmt))
    return enc_sum([enc_abs(enc_sub(x, avg)) for x in xs])


def build_cost_table(enc_x: Sequence[EncWord], epsilon1: float, stream: NoiseSource, *,
                     sensitivity: float = DEFAULT_COST_SENSITIVITY,
                     noise_log: NoiseLog | None = None) -> dict[tuple[int, int], EncWord]:
    params = LaplaceParams(sensitivity, epsilon1)
    return {
        (l, r): add_noise_enc(interval_cost(enc_x, l, r), params, stream, (COST_PHASE, l, r), noise_log)
        for l, r in intervals(len(enc_x))
    }


def partition_total_cost(table: dict[tuple[int, int], EncWord], p: Partition) -> EncWord:
    return enc_sum([table[b] for b in p.buckets])


@dataclass(frozen=True)
class EncArgmin:
    index_bits: tuple[EncBit, ...]
    cost: EncWord
    n: int

    def digest(self) -> str:
        bits = "".join(f"{b.key_id or '-'}{b.bit}" for b in self.index_bits)
        return words_digest([self.cost]) + ":" + bits

    def decrypt_mask(self, key: SecretKey) -> int:
        bk = self.cost.backend
        return sum(bk.decrypt(key, b) << i for i, b in enumerate(self.index_bits))


def select_min_partition(costs: Sequence[tuple[EncWord, int]], n: int | None = None) -> EncArgmin:
    """Encrypted argmin over ``(cost, cut_mask)`` candidates.

    Candidates are reduced pairwise, left against right; the right one wins
    only when strictly cheaper, so ties go to the earliest candidate.
    """
    if not costs:
        raise ValueError("no candidates")
    bk = costs[0][0].backend
    if n is None:
        n = max(m for _, m in costs).bit_length() + 1
    width = n - 1
    level = [(c, tuple(bk.trivial((m >> i) & 1) for i in range(width))) for c, m in costs]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            (ca, ia), (cb, ib) = level[i], level[i + 1]
            take_b = enc_lt(cb, ca)
            nxt.append((enc_select(take_b, cb, ca),
                        tuple(bk.mux(take_b, y, x) for x, y in zip(ia, ib))))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    cost, idx = level[0]
    return EncArgmin(idx, cost, n)


def select_partition(enc_x: Sequence[EncWord], epsilon1: float, stream: NoiseSource, *,
                     sensitivity: float = DEFAULT_COST_SENSITIVITY,
                     noise_log: NoiseLog | None = None,
                     max_n: int = MAX_ENCRYPTED_N) -> EncArgmin:
    """Noisy cost table, per-candidate totals and encrypted argmin in one go."""
    n = len(enc_x)
    candidates = enumerate_partitions(n, max_n=max_n)
    table = build_cost_table(enc_x, epsilon1, stream, sensitivity=sensitivity, noise_log=noise_log)
    totals = [(partition_total_cost(table, p), p.cut_mask) for p in candidates]
    return select_min_partition(totals, n)


def bucket_sums(enc_x: Sequence[EncWord], p: Partition) -> list[EncWord]:
    if p.n != len(enc_x):
        raise ValueError(f"partition for n={p.n} applied to {len(enc_x)} domains")
    return [enc_sum(enc_x[l - 1:r]) for l, r in p.buckets]


def noisy_bucket_sums(sums: Sequence[EncWord], p: Partition, epsilon2: float,
                      stream: NoiseSource, noise_log: NoiseLog | None = None) -> list[EncWord]:
    """Add Laplace(1/epsilon2) noise to each bucket total; one record moves one total by 1."""
    if len(sums) != p.k:
        raise ValueError(f"{len(sums)} sums for {p.k} buckets")
    params = LaplaceParams(1.0, epsilon2)
    return [add_noise_enc(s, params, stream, (SUM_PHASE, l, r), noise_log)
            for s, (l, r) in zip(sums, p.buckets)]

