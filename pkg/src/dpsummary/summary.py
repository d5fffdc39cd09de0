"""Plaintext DP-summary: uniform expansion, range queries and error metrics."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .partition import Partition


@dataclass(frozen=True)
class DpSummary:
    x_prime: tuple[float, ...]
    cut_mask: int
    s_prime: tuple[float, ...]
    provenance: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.x_prime)

    @property
    def partition(self) -> Partition:
        return Partition(self.n, self.cut_mask)

    def digest(self) -> str:
        body = json.dumps([self.cut_mask, list(self.s_prime), list(self.x_prime)])
        return hashlib.sha256(body.encode()).hexdigest()

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "cut_mask": self.cut_mask,
            "s_prime": list(self.s_prime),
            "x_prime": list(self.x_prime),
            "provenance": self.provenance,
            "digest": self.digest(),
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> DpSummary:
        data = json.loads(text)
        summary = cls(tuple(data["x_prime"]), int(data["cut_mask"]), tuple(data["s_prime"]),
                      data.get("provenance", {}))
        if summary.n != data["n"]:
            raise ValueError("summary length does not match n")
        if "digest" in data and data["digest"] != summary.digest():
            raise ValueError("summary digest mismatch")
        return summary


def uniform_expand(s_prime: Sequence[float], p: Partition, *, clamp: bool = True,
                   provenance: dict | None = None) -> DpSummary:
    """Spread each noisy bucket total evenly over its domains.

    Negative cells are replaced with 0 afterwards unless ``clamp`` is off.
    """
    if len(s_prime) != p.k:
        raise ValueError(f"{len(s_prime)} bucket totals for a partition with {p.k} buckets")
    x = []
    for s, size in zip(s_prime, p.sizes):
        v = float(s) / size
        if clamp and v < 0:
            v = 0.0
        x.extend([v] * size)
    return DpSummary(tuple(x), p.cut_mask, tuple(float(s) for s in s_prime), dict(provenance or {}))


def range_query(summary: DpSummary, l: int, r: int, *, exact: bool = False) -> float | Fraction:
    """Sum of ``x'`` over domains ``l..r`` (1-based, inclusive).

    The float answer is correctly rounded (``math.fsum``). With ``exact=True``
    the sum is a :class:`~fractions.Fraction`, for which splitting a range into
    two sub-ranges adds up without any rounding.
    """
    if not 1 <= l <= r <= summary.n:
        raise ValueError(f"invalid range [{l}, {r}] for n={summary.n}")
    cells = summary.x_prime[l - 1:r]
    if exact:
        return sum((Fraction(v) for v in cells), Fraction(0))
    return math.fsum(cells)


def summary_error(summary: DpSummary, x: Sequence[float]) -> float:
    """Mean absolute per-domain error against the true histogram."""
    if len(x) != summary.n:
        raise ValueError(f"histogram has {len(x)} domains, summary has {summary.n}")
    return sum(abs(a - b) for a, b in zip(summary.x_prime, x)) / summary.n
