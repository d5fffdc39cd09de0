"""Differentially private histogram summaries built over simulated bit-wise FHE."""

from .config import PipelineConfig, random_histogram
from .fixed import FixedFormat, FixedOverflowError, PlainFixed, encode
from .gates import CleartextBackend, CountingBackend, EncBit, GateStats, SecretKey, keygen
from .noise import (BudgetExhausted, BudgetLedger, BudgetStatus, LaplaceParams, NoiseLog,
                    NoiseStream, PrivacyBudget, ScriptedNoise, ZeroNoise)
from .oracle import brute_force_best_partition, oracle_pipeline
from .partition import Partition, enumerate_partitions
from .protocol import assert_visibility, run_pipeline
from .summary import DpSummary, range_query, summary_error, uniform_expand

__all__ = [
    "BudgetExhausted",
    "BudgetLedger",
    "BudgetStatus",
    "CleartextBackend",
    "CountingBackend",
    "DpSummary",
    "EncBit",
    "FixedFormat",
    "FixedOverflowError",
    "GateStats",
    "LaplaceParams",
    "NoiseLog",
    "NoiseStream",
    "Partition",
    "PipelineConfig",
    "PlainFixed",
    "PrivacyBudget",
    "ScriptedNoise",
    "SecretKey",
    "ZeroNoise",
    "assert_visibility",
    "brute_force_best_partition",
    "encode",
    "enumerate_partitions",
    "keygen",
    "oracle_pipeline",
    "random_histogram",
    "range_query",
    "run_pipeline",
    "summary_error",
    "uniform_expand",
]

__version__ = "0.1.0"
