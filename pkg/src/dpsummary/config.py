"""Pipeline configuration and data sources."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .fixed import FixedFormat
from .noise import PrivacyBudget
from .partition import DEFAULT_COST_SENSITIVITY, MAX_ENCRYPTED_N

DATA_LOW, DATA_HIGH = 0, 10


def random_histogram(n: int, seed: int, low: int = DATA_LOW, high: int = DATA_HIGH) -> tuple[int, ...]:
    """Integer counts drawn uniformly from ``low..high`` (inclusive)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    return tuple(int(v) for v in rng.integers(low, high + 1, size=n))


def histogram_to_records(x: Sequence[float]) -> tuple[int, ...]:
    """One record (a 1-based domain index) per unit of count."""
    records = []
    for i, c in enumerate(x, start=1):
        if c < 0 or int(c) != c:
            raise ValueError("record expansion needs non-negative integer counts; inject the histogram instead")
        records.extend([i] * int(c))
    return tuple(records)


def records_to_histogram(records: Sequence[int], n: int) -> tuple[int, ...]:
    counts = [0] * n
    for d in records:
        if not 1 <= d <= n:
            raise ValueError(f"record domain {d} outside 1..{n}")
        counts[d - 1] += 1
    return tuple(counts)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to reproduce one summary construction.

    Exactly one data source is used, in this order of precedence:
    ``histogram``, ``records``, else a random histogram from ``data_seed``.
    ``inject_histogram`` makes a single owner submit the whole histogram as one
    pre-aggregated encrypted vector instead of one record per unit count.
    """

    n: int
    fmt: FixedFormat = FixedFormat(16, 8)
    budget: PrivacyBudget = field(default_factory=PrivacyBudget.split)
    noise_seed: int = 0
    key_seed: int = 0
    histogram: tuple[float, ...] | None = None
    records: tuple[int, ...] | None = None
    data_seed: int = 0
    inject_histogram: bool = False
    cost_sensitivity: float = DEFAULT_COST_SENSITIVITY
    max_n: int = MAX_ENCRYPTED_N
    queries: tuple[tuple[int, int], ...] = ()
    dataset_id: str | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.histogram is not None and len(self.histogram) != self.n:
            raise ValueError(f"histogram has {len(self.histogram)} domains, n={self.n}")

    def with_(self, **changes) -> PipelineConfig:
        return replace(self, **changes)

    def resolve_histogram(self) -> tuple[float, ...]:
        if self.histogram is not None:
            return tuple(self.histogram)
        if self.records is not None:
            return records_to_histogram(self.records, self.n)
        return random_histogram(self.n, self.data_seed)

    def resolve_records(self) -> tuple[int, ...]:
        if self.records is not None:
            return tuple(self.records)
        return histogram_to_records(self.resolve_histogram())

    @property
    def source_kind(self) -> str:
        if self.histogram is not None:
            return "histogram"
        return "records" if self.records is not None else "random"

    def resolved_dataset_id(self) -> str:
        if self.dataset_id is not None:
            return self.dataset_id
        src = {"histogram": self.histogram, "records": self.records, "data_seed": self.data_seed,
               "kind": self.source_kind}
        return hashlib.sha256(json.dumps(src, sort_keys=True).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        b = self.budget
        return {
            "n": self.n,
            "format": str(self.fmt),
            "epsilon": b.epsilon,
            "split": [b.epsilon1, b.epsilon2],
            "noise_seed": self.noise_seed,
            "key_seed": self.key_seed,
            "histogram": None if self.histogram is None else list(self.histogram),
            "records": None if self.records is None else list(self.records),
            "data_seed": self.data_seed,
            "inject_histogram": self.inject_histogram,
            "cost_sensitivity": self.cost_sensitivity,
            "max_n": self.max_n,
            "queries": [list(q) for q in self.queries],
            "dataset_id": self.dataset_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> PipelineConfig:
        data = dict(data)
        fmt = data.pop("format", "16:8")
        if isinstance(fmt, str):
            fmt = FixedFormat.parse(fmt)
        else:
            fmt = FixedFormat(*fmt)
        epsilon = float(data.pop("epsilon", 1.0))
        split = data.pop("split", (1, 3))
        budget = PrivacyBudget.split(epsilon, tuple(float(v) for v in split))
        histogram = data.pop("histogram", None)
        records = data.pop("records", None)
        queries = data.pop("queries", ())
        # "seed" is accepted as shorthand for both seeds
        seed = data.pop("seed", None)
        if seed is not None:
            data.setdefault("noise_seed", seed)
            data.setdefault("key_seed", seed)
            data.setdefault("data_seed", seed)
        n = data.pop("n", None)
        if n is None:
            if histogram is None:
                raise ValueError("config needs n or an inline histogram")
            n = len(histogram)
        return cls(
            n=int(n),
            fmt=fmt,
            budget=budget,
            histogram=None if histogram is None else tuple(histogram),
            records=None if records is None else tuple(int(r) for r in records),
            queries=tuple(tuple(q) for q in queries),
            **data,
        )

    @classmethod
    def load(cls, path: str | Path) -> PipelineConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))
