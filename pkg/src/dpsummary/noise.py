"""Laplace noise, its fixed-point quantization and privacy-budget bookkeeping.

Noise draws are addressed by label rather than by call order: a
:class:`NoiseStream` maps ``(seed, label, per-label counter)`` through a hash to
a uniform variate, so the encrypted pipeline and the plaintext oracle see the
same values no matter which order they consume them in.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Hashable, Protocol

from .enc_fixed import EncWord, enc_add, enc_trivial_plain
from .fixed import FixedFormat, PlainFixed, encode

log = logging.getLogger(__name__)

Label = tuple[Hashable, ...]


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    epsilon1: float
    epsilon2: float

    def __post_init__(self):
        for name in ("epsilon", "epsilon1", "epsilon2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not math.isclose(self.epsilon1 + self.epsilon2, self.epsilon, rel_tol=1e-12):
            raise ValueError("epsilon1 + epsilon2 must equal epsilon")

    @classmethod
    def split(cls, epsilon: float = 1.0, ratio: tuple[float, float] = (1, 3)) -> PrivacyBudget:
        a, b = ratio
        if a <= 0 or b <= 0:
            raise ValueError("split ratio parts must be positive")
        e1 = epsilon * a / (a + b)
        return cls(epsilon, e1, epsilon - e1)


@dataclass(frozen=True)
class LaplaceParams:
    sensitivity: float
    epsilon_share: float

    def __post_init__(self):
        if self.sensitivity < 0:
            raise ValueError("sensitivity must be non-negative")
        if self.epsilon_share <= 0:
            raise ValueError("epsilon share must be positive")
        if self.scale <= 0:
            raise ValueError("Laplace scale must be positive")

    @property
    def scale(self) -> float:
        return self.sensitivity / self.epsilon_share


def laplace_from_uniform(u: float, scale: float) -> float:
    """Inverse CDF of Laplace(0, scale) at ``u`` in (-1/2, 1/2)."""
    if u == 0:
        return 0.0
    return -scale * math.copysign(1.0, u) * math.log1p(-2.0 * abs(u))


class NoiseSource(Protocol):
    def sample(self, params: LaplaceParams, label: Label) -> float: ...


class NoiseStream:
    """Counter-based deterministic Laplace generator."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._counters: dict[Label, int] = {}
        self._lock = threading.Lock()

    def uniform(self, label: Label) -> float:
        with self._lock:
            counter = self._counters.get(label, 0)
            self._counters[label] = counter + 1
        msg = repr((self.seed, tuple(label), counter)).encode()
        k = int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "big") >> 11
        # midpoint of one of 2**53 cells: never exactly -1/2, 0 or 1/2
        return (k + 0.5) / (1 << 53) - 0.5

    def sample(self, params: LaplaceParams, label: Label) -> float:
        return laplace_from_uniform(self.uniform(label), params.scale)


class ZeroNoise:
    def sample(self, params: LaplaceParams, label: Label) -> float:
        return 0.0


@dataclass
class ScriptedNoise:
    """Fixed noise values per label; unlisted labels get ``default``."""

    values: dict[Label, float]
    default: float = 0.0

    def sample(self, params: LaplaceParams, label: Label) -> float:
        return self.values.get(tuple(label), self.default)


def sample_laplace(params: LaplaceParams, stream: NoiseSource, label: Label) -> float:
    return stream.sample(params, label)


@dataclass(frozen=True)
class NoiseDraw:
    phase: str
    label: Label
    sensitivity: float
    epsilon_share: float
    sample: float
    raw: int | None
    clamped: bool = False

    def to_line(self) -> str:
        raw = "-" if self.raw is None else str(self.raw)
        label = ",".join(str(p) for p in self.label[1:])
        flag = " clamped" if self.clamped else ""
        return (f"{self.phase}\t{label}\t{self.sensitivity:g}\t{self.epsilon_share:g}"
                f"\t{self.sample!r}\t{raw}{flag}")


@dataclass
class NoiseLog:
    draws: list[NoiseDraw] = field(default_factory=list)

    def record(self, draw: NoiseDraw) -> None:
        self.draws.append(draw)

    def count(self, phase: str) -> int:
        return sum(1 for d in self.draws if d.phase == phase)

    def lines(self) -> list[str]:
        return [d.to_line() for d in self.draws]

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("phase\tlabel\tsensitivity\tepsilon\tsample\traw\n")
            for line in self.lines():
                fh.write(line + "\n")


def quantize_noise(r: float, fmt: FixedFormat) -> tuple[PlainFixed, bool]:
    """Truncate a real sample into ``fmt``; returns ``(value, clamped)``."""
    q = encode(r, fmt, clamp=True)
    clamped = not (fmt.min_value <= r < fmt.max_value + fmt.step)
    if clamped:
        log.warning("noise sample %r clamped to %s in format %s", r, q.value, fmt)
    return q, clamped


def draw_noise(stream: NoiseSource, params: LaplaceParams, label: Label,
               fmt: FixedFormat | None = None, noise_log: NoiseLog | None = None):
    """Draw one labelled sample, quantize it if ``fmt`` is given, and log it.

    Returns the :class:`PlainFixed` noise, or the real sample when ``fmt`` is
    ``None``.
    """
    r = stream.sample(params, label)
    q, clamped = (None, False) if fmt is None else quantize_noise(r, fmt)
    if noise_log is not None:
        noise_log.record(NoiseDraw(str(label[0]), tuple(label), params.sensitivity,
                                   params.epsilon_share, r, None if q is None else q.raw, clamped))
    return r if q is None else q


def add_noise_enc(w: EncWord, params: LaplaceParams, stream: NoiseSource, label: Label,
                  noise_log: NoiseLog | None = None) -> EncWord:
    """Add quantized Laplace noise to a ciphertext without any key."""
    q = draw_noise(stream, params, label, w.fmt, noise_log)
    return enc_add(w, enc_trivial_plain(w.backend, q))


class BudgetStatus(enum.Enum):
    OK = "ok"
    EXHAUSTED = "exhausted"


class BudgetLedger:
    """Allows exactly one summary construction per dataset."""

    def __init__(self):
        self._spent: dict[str, PrivacyBudget] = {}
        self._lock = threading.Lock()

    def check(self, dataset_id: str) -> BudgetStatus:
        with self._lock:
            return BudgetStatus.EXHAUSTED if dataset_id in self._spent else BudgetStatus.OK

    def spend(self, dataset_id: str, budget: PrivacyBudget) -> None:
        with self._lock:
            if dataset_id in self._spent:
                raise BudgetExhausted(f"privacy budget for dataset {dataset_id!r} already spent")
            self._spent[dataset_id] = budget

    def spent(self) -> dict[str, PrivacyBudget]:
        with self._lock:
            return dict(self._spent)


def budget_check(budget: PrivacyBudget, ledger: BudgetLedger, dataset_id: str) -> BudgetStatus:
    """Whether ``dataset_id`` may still be summarized under ``budget``.

    A construction always consumes the whole budget, so the answer depends
    only on whether the dataset has been summarized before.
    """
    return ledger.check(dataset_id)
