"""Shared fixtures: a small simulated fleet and a quick posterior fit.

The session-scoped fit keeps the expensive NUTS run out of individual
tests; anything that only needs *some* valid posterior reuses it.
"""

import numpy as np
import pytest

from strainfield import (
    EventDataset,
    HsgpBasis,
    SamplerConfig,
    TrainClass,
    make_fleet,
    normalize_fleet,
    run_sampler,
)


@pytest.fixture(scope="session")
def small_fleet():
    """Two Type350 + two Type22x time-indexed events, light noise."""
    events = make_fleet(TrainClass.TYPE_350, 2, seed=101, target_samples=250)
    events += make_fleet(TrainClass.TYPE_22X, 2, seed=102, target_samples=250)
    return events


@pytest.fixture(scope="session")
def small_dataset(small_fleet):
    normalized, rejected = normalize_fleet(small_fleet)
    assert not rejected
    return EventDataset(normalized, HsgpBasis(L=3.0, M=15))


@pytest.fixture(scope="session")
def small_fit(small_dataset):
    config = SamplerConfig(
        chains=2, warmup_iterations=300, sampling_iterations=300, seed=11
    )
    return run_sampler(small_dataset, config)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
