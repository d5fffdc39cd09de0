from __future__ import annotations

import pytest
from hypothesis import settings

from dpsummary.bench import dp_ratio_audit
from dpsummary.config import PipelineConfig
from dpsummary.fixed import FixedFormat
from dpsummary.noise import PrivacyBudget, ScriptedNoise

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

FORMATS = (FixedFormat(10, 2), FixedFormat(12, 4), FixedFormat(16, 8))

# worked example: seven domains, three buckets
EX_X = (3, 2, 6, 5, 6, 3, 4)
EX_BUCKETS = [[1, 2], [3, 4, 5], [6, 7]]
EX_MASK = 18
EX_S = (5, 17, 7)
EX_S_PRIME = (4.6, 16.2, 7.8)
EX_X_PRIME = (2.3, 2.3, 5.4, 5.4, 5.4, 3.9, 3.9)


def example_noise() -> ScriptedNoise:
    """Forces the worked-example partition and bucket noise.

    The three chosen intervals get a large negative cost noise so their
    partition wins the argmin; everything else is noise-free.
    """
    return ScriptedNoise({
        ("eps1", 1, 2): -30.0, ("eps1", 3, 5): -30.0, ("eps1", 6, 7): -30.0,
        ("eps2", 1, 2): -0.4, ("eps2", 3, 5): -0.8, ("eps2", 6, 7): 0.8,
    })


def example_config(**kw) -> PipelineConfig:
    base = dict(n=7, fmt=FixedFormat(16, 8), budget=PrivacyBudget.split(1.0), histogram=EX_X,
                inject_histogram=True, queries=((1, 7), (1, 1)))
    base.update(kw)
    return PipelineConfig(**base)


@pytest.fixture(scope="session")
def dp_audit():
    # neighbouring 2-domain histograms, one count apart; 10^5 runs each
    return dp_ratio_audit((5, 5), (6, 5), runs=100_000, epsilon=1.0, seed=0)
