"""Plaintext reference implementations of the summary construction.

``fixed_point`` mode repeats the encrypted algorithm on :class:`PlainFixed`
integers (same truncation, same wrap-around, same labelled noise draws) and
must agree with the encrypted pipeline bit for bit. ``float64`` mode runs the
same algorithm in double precision as the accuracy baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .config import PipelineConfig
from .fixed import FixedFormat, PlainFixed, encode
from .noise import LaplaceParams, NoiseLog, NoiseSource, NoiseStream, draw_noise
from .partition import COST_PHASE, MAX_PLAIN_N, SUM_PHASE, Partition, enumerate_partitions, intervals
from .summary import DpSummary, uniform_expand

FLOAT64 = "float64"
BRUTE_FORCE_MAX_N = 15


@dataclass(frozen=True)
class OracleRun:
    mode: str
    cut_mask: int
    s_prime_raw: tuple[int, ...] | None
    s_prime: tuple[float, ...]
    summary: DpSummary
    seed: int

    @property
    def x_prime(self) -> tuple[float, ...]:
        return self.summary.x_prime


def _mode_name(mode) -> str:
    return FLOAT64 if mode == FLOAT64 else f"fixed_point({mode})"


def _first_min(costs: Sequence) -> int:
    best = 0
    for i in range(1, len(costs)):
        if costs[i] < costs[best]:
            best = i
    return best


def _fixed_costs(x: Sequence[PlainFixed], fmt: FixedFormat, params: LaplaceParams,
                 stream: NoiseSource, noise_log: NoiseLog | None) -> dict:
    table = {}
    for l, r in intervals(len(x)):
        cells = x[l - 1:r]
        total = cells[0]
        for c in cells[1:]:
            total = total + c
        avg = total.mul(encode(1.0 / len(cells), fmt))
        dev = abs(cells[0] - avg)
        for c in cells[1:]:
            dev = dev + abs(c - avg)
        table[(l, r)] = dev + draw_noise(stream, params, (COST_PHASE, l, r), fmt, noise_log)
    return table


def _float_costs(x: Sequence[float], params: LaplaceParams, stream: NoiseSource,
                 noise_log: NoiseLog | None) -> dict:
    table = {}
    for l, r in intervals(len(x)):
        cells = x[l - 1:r]
        avg = sum(cells) / len(cells)
        dev = sum(abs(c - avg) for c in cells)
        table[(l, r)] = dev + draw_noise(stream, params, (COST_PHASE, l, r), None, noise_log)
    return table


def oracle_pipeline(x: Sequence[float], config: PipelineConfig, mode: FixedFormat | str, *,
                    noise: NoiseSource | None = None, noise_log: NoiseLog | None = None,
                    max_n: int = MAX_PLAIN_N) -> OracleRun:
    """Run the summary construction in the clear.

    ``mode`` is a :class:`FixedFormat` for the bit-exact mirror or ``"float64"``.
    Noise comes from ``NoiseStream(config.noise_seed)`` unless ``noise`` is given.
    """
    n = len(x)
    if n != config.n:
        raise ValueError(f"histogram has {n} domains, config says {config.n}")
    stream = noise if noise is not None else NoiseStream(config.noise_seed)
    budget = config.budget
    cost_params = LaplaceParams(config.cost_sensitivity, budget.epsilon1)
    sum_params = LaplaceParams(1.0, budget.epsilon2)
    candidates = enumerate_partitions(n, max_n=max_n)

    if mode == FLOAT64:
        xs = [float(v) for v in x]
        table = _float_costs(xs, cost_params, stream, noise_log)
        totals = []
        for p in candidates:
            t = 0.0
            for b in p.buckets:
                t += table[b]
            totals.append(t)
        best = candidates[_first_min(totals)]
        s_prime = tuple(sum(xs[l - 1:r]) + draw_noise(stream, sum_params, (SUM_PHASE, l, r), None, noise_log)
                        for l, r in best.buckets)
        raws = None
    else:
        fmt = mode
        xs = [encode(v, fmt) for v in x]
        table = _fixed_costs(xs, fmt, cost_params, stream, noise_log)
        totals = []
        for p in candidates:
            bs = p.buckets
            t = table[bs[0]]
            for b in bs[1:]:
                t = t + table[b]
            totals.append(t.raw)
        best = candidates[_first_min(totals)]
        noisy = []
        for l, r in best.buckets:
            s = xs[l - 1]
            for c in xs[l:r]:
                s = s + c
            noisy.append(s + draw_noise(stream, sum_params, (SUM_PHASE, l, r), fmt, noise_log))
        raws = tuple(v.raw for v in noisy)
        s_prime = tuple(v.value for v in noisy)

    summary = uniform_expand(s_prime, best, provenance={"mode": _mode_name(mode), "seed": config.noise_seed})
    return OracleRun(_mode_name(mode), best.cut_mask, raws, s_prime, summary, config.noise_seed)


def true_cost(x: Sequence[float], p: Partition) -> Fraction:
    """Exact total L1 deviation of ``x`` under partition ``p``."""
    xs = [Fraction(v) for v in x]
    total = Fraction(0)
    for l, r in p.buckets:
        cells = xs[l - 1:r]
        avg = sum(cells, Fraction(0)) / len(cells)
        total += sum((abs(c - avg) for c in cells), Fraction(0))
    return total


def brute_force_best_partition(x: Sequence[float]) -> tuple[int, Fraction]:
    """Noise-free exact argmin over all partitions; first minimum wins ties."""
    n = len(x)
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"n={n} too large for brute force (max {BRUTE_FORCE_MAX_N})")
    best_mask, best_cost = 0, None
    for p in enumerate_partitions(n, max_n=BRUTE_FORCE_MAX_N):
        c = true_cost(x, p)
        if best_cost is None or c < best_cost:
            best_mask, best_cost = p.cut_mask, c
    return best_mask, best_cost
