"""Experiments: gate-count scaling, accuracy vs. bit size, DP audit, equivalence sweep."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import PipelineConfig, random_histogram
from .fixed import FixedFormat
from .gates import DEFAULT_GATE_SECONDS, CountingBackend
from .noise import NoiseStream, PrivacyBudget
from .oracle import FLOAT64, oracle_pipeline
from .protocol import run_pipeline
from .summary import summary_error

STUDY_FORMATS = (FixedFormat(10, 2), FixedFormat(12, 4), FixedFormat(16, 8))
CONSTRUCTION_PHASES = ("cost_table", "argmin", "bucket_sums")

GATE_FIELDS = ["n", "T", "F", "records", "aggregation", "cost_table", "argmin", "bucket_sums",
               "construction", "total", "cost_estimate_s"]
ACCURACY_FIELDS = ["n", "T", "F", "trials", "mean_error", "std_error",
                   "float64_mean_error", "float64_std_error"]


def write_csv(rows: Sequence[dict], fieldnames: Sequence[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def _rec_seed(seed: int, *parts: int) -> int:
    # independent, reproducible sub-seeds per (experiment cell, trial)
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1)[0])


# -- gate counts -----------------------------------------------------------------

def bench_gates(n_values: Iterable[int], formats: Iterable[FixedFormat] = STUDY_FORMATS, *,
                seed: int = 0, records_per_domain: int = 5,
                unit_cost: float = DEFAULT_GATE_SECONDS, budget: PrivacyBudget | None = None) -> list[dict]:
    """One counting-backend construction per ``(n, format)``.

    The aggregation phase uses ``records_per_domain * n`` one-hot records with
    random domains; the remaining phases are data-oblivious, so their counts
    depend on ``(n, T, F)`` only. ``construction`` sums the phases from
    partitioning to the noisy bucket totals.
    """
    budget = budget or PrivacyBudget.split()
    rows = []
    for n in n_values:
        for fmt in formats:
            rng = np.random.default_rng(_rec_seed(seed, n, fmt.total_bits, fmt.frac_bits))
            records = tuple(int(d) for d in rng.integers(1, n + 1, size=records_per_domain * n))
            cfg = PipelineConfig(n=n, fmt=fmt, budget=budget, records=records,
                                 noise_seed=seed, key_seed=seed)
            backend = CountingBackend(unit_cost=unit_cost)
            run = run_pipeline(cfg, backend=backend)
            phases = run.cs.phase_gates
            rows.append({
                "n": n, "T": fmt.total_bits, "F": fmt.frac_bits, "records": len(records),
                **{p: phases.get(p, 0) for p in ("aggregation", *CONSTRUCTION_PHASES)},
                "construction": sum(phases.get(p, 0) for p in CONSTRUCTION_PHASES),
                "total": backend.stats.total,
                "cost_estimate_s": round(backend.stats.cost_estimate, 6),
            })
    return rows


def affine_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares ``y = a*x + b``; returns ``(a, b, max relative residual)``."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    A = np.vstack([xs, np.ones_like(xs)]).T
    (a, b), *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = np.abs(ys - (a * xs + b)) / np.abs(ys)
    return float(a), float(b), float(resid.max())


# -- accuracy --------------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyCell:
    n: int
    fmt: FixedFormat | None
    errors: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def std_error(self) -> float:
        return float(np.std(self.errors, ddof=1) / math.sqrt(len(self.errors)))


def accuracy_study(n_values: Iterable[int], formats: Iterable[FixedFormat] = STUDY_FORMATS, *,
                   trials: int = 100, epsilon: float = 1.0, split: tuple[float, float] = (1, 3),
                   seed: int = 0) -> dict[tuple[int, str], AccuracyCell]:
    """Mean absolute summary error per ``(n, format)`` plus a float64 baseline.

    Every format in a trial sees the same histogram and the same noise seed,
    so differences between formats come from truncation alone. Runs use the
    fixed-point oracle, which is bit-identical to the encrypted pipeline.
    """
    if trials < 2:
        raise ValueError("need at least two trials for a standard error")
    formats = list(formats)
    budget = PrivacyBudget.split(epsilon, split)
    cells: dict[tuple[int, str], AccuracyCell] = {}
    for n in n_values:
        errs: dict[str, list[float]] = {str(f): [] for f in formats}
        errs[FLOAT64] = []
        for trial in range(trials):
            x = random_histogram(n, _rec_seed(seed, 1, n, trial))
            cfg = PipelineConfig(n=n, histogram=x, budget=budget, noise_seed=_rec_seed(seed, 2, n, trial))
            for f in formats:
                errs[str(f)].append(summary_error(oracle_pipeline(x, cfg, f).summary, x))
            errs[FLOAT64].append(summary_error(oracle_pipeline(x, cfg, FLOAT64).summary, x))
        for f in formats:
            cells[(n, str(f))] = AccuracyCell(n, f, tuple(errs[str(f)]))
        cells[(n, FLOAT64)] = AccuracyCell(n, None, tuple(errs[FLOAT64]))
    return cells


def accuracy_rows(cells: dict[tuple[int, str], AccuracyCell]) -> list[dict]:
    rows = []
    for (n, key), cell in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        if cell.fmt is None:
            continue
        base = cells[(n, FLOAT64)]
        rows.append({
            "n": n, "T": cell.fmt.total_bits, "F": cell.fmt.frac_bits, "trials": len(cell.errors),
            "mean_error": f"{cell.mean:.6f}", "std_error": f"{cell.std_error:.6f}",
            "float64_mean_error": f"{base.mean:.6f}", "float64_std_error": f"{base.std_error:.6f}",
        })
    rows.sort(key=lambda r: (r["n"], r["T"], r["F"]))
    return rows


def pooled_std_error(a: AccuracyCell, b: AccuracyCell) -> float:
    """Standard error of the difference of two means."""
    return math.hypot(a.std_error, b.std_error)


# -- empirical DP audit -----------------------------------------------------------

@dataclass(frozen=True)
class DpAudit:
    runs: int
    bins_checked: int
    worst_ratio: float
    worst_bound: float
    violations: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.violations and self.bins_checked > 0


def _bin(run, width: float) -> tuple:
    return (run.cut_mask, tuple(math.floor(s / width) for s in run.s_prime))


def dp_ratio_audit(x: Sequence[float], x_neighbor: Sequence[float], *, runs: int = 100_000,
                   epsilon: float = 1.0, fmt: FixedFormat = FixedFormat(16, 8),
                   bin_width: float = 2.0, min_hits: int = 100, seed: int = 0) -> DpAudit:
    """Frequency-ratio test of the whole construction on two neighbouring histograms.

    Outputs are binned by (partition, floor(S'/bin_width)). For each bin with at
    least ``min_hits`` hits under either input, the ratio of hit frequencies
    must stay below ``e**epsilon * (1 + 3 * se)``, where ``se`` is the
    delta-method relative standard error of the ratio of two binomial
    proportions.
    """
    n = len(x)
    budget = PrivacyBudget.split(epsilon)
    counts = []
    for which, data in enumerate((x, x_neighbor)):
        c: Counter = Counter()
        cfg = PipelineConfig(n=n, histogram=tuple(data), budget=budget)
        base = _rec_seed(seed, which) << 32
        for i in range(runs):
            run = oracle_pipeline(data, cfg, fmt, noise=NoiseStream(base + i))
            c[_bin(run, bin_width)] += 1
        counts.append(c)
    c1, c2 = counts
    violations = []
    checked = 0
    worst_ratio = worst_bound = 0.0
    for b in set(c1) | set(c2):
        h1, h2 = c1.get(b, 0), c2.get(b, 0)
        if max(h1, h2) < min_hits:
            continue
        checked += 1
        if min(h1, h2) == 0:
            violations.append(f"{b}: {h1} vs {h2}")
            continue
        p1, p2 = h1 / runs, h2 / runs
        ratio = max(p1 / p2, p2 / p1)
        se = math.sqrt((1 - p1) / (runs * p1) + (1 - p2) / (runs * p2))
        bound = math.exp(epsilon) * (1 + 3 * se)
        if not worst_bound or ratio / bound > worst_ratio / worst_bound:
            worst_ratio, worst_bound = ratio, bound
        if ratio > bound:
            violations.append(f"{b}: ratio {ratio:.4f} > {bound:.4f}")
    return DpAudit(runs, checked, worst_ratio, worst_bound, tuple(violations))


# -- equivalence sweep ------------------------------------------------------------

@dataclass(frozen=True)
class Mismatch:
    n: int
    fmt: FixedFormat
    seed: int
    encrypted: tuple
    oracle: tuple


def verify_equivalence(n_values: Iterable[int], formats: Iterable[FixedFormat] = STUDY_FORMATS, *,
                       histograms: int = 50, seed: int = 0) -> tuple[int, list[Mismatch]]:
    """Compare encrypted and fixed-point oracle outputs on seeded random histograms.

    Returns ``(cases checked, mismatches)``.
    """
    checked = 0
    bad: list[Mismatch] = []
    formats = list(formats)
    for n in n_values:
        for fmt in formats:
            for h in range(histograms):
                s = _rec_seed(seed, n, fmt.total_bits, h)
                cfg = PipelineConfig(n=n, fmt=fmt, data_seed=s, noise_seed=s, key_seed=s,
                                     inject_histogram=True)
                run = run_pipeline(cfg)
                ref = oracle_pipeline(run.histogram, cfg, fmt)
                enc = (run.cut_mask, run.s_prime_raw)
                orc = (ref.cut_mask, ref.s_prime_raw)
                checked += 1
                if enc != orc:
                    bad.append(Mismatch(n, fmt, s, enc, orc))
    return checked, bad
