"""Fleet-level monitoring from fitted posterior mean functions.

Each event's posterior mean envelope is evaluated on a common grid; the
pairwise Pearson correlations between envelopes form the monitoring matrix.
Healthy fleets produce one high-correlation block per train type, and an
event that correlates poorly with its own type's block is flagged as
outlying.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .classify import TrainClass
from .errors import DegenerateInputError
from .model import EventDataset
from .predictive import _function_draws
from .sampler import PosteriorSamples

DEFAULT_GRID = (-2.5, 2.5, 201)
DEFAULT_SCORE_FLOOR = 0.8
DEFAULT_MAD_MULTIPLIER = 3.0
MIN_GROUP_SIZE = 3


@dataclass(frozen=True)
class OutlierFlag:
    event_id: str
    label: Optional[TrainClass]
    score: float
    flagged: bool


@dataclass(frozen=True)
class CorrelationReport:
    matrix: np.ndarray  # (K, K) Pearson correlations
    event_ids: list[str]
    labels: list[Optional[TrainClass]]
    grid: np.ndarray
    flags: list[OutlierFlag]


def default_grid() -> np.ndarray:
    lo, hi, n = DEFAULT_GRID
    return np.linspace(lo, hi, n)


def posterior_mean_matrix(
    samples: PosteriorSamples, data: EventDataset, grid
) -> np.ndarray:
    """Noise-free posterior mean of every event's function on one grid."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size < 2:
        raise ValueError("grid needs at least 2 points")
    rows = [
        _function_draws(samples, data, k, grid).mean(axis=0)
        for k in range(data.num_events)
    ]
    return np.vstack(rows)


def pearson_correlation_matrix(means: np.ndarray) -> np.ndarray:
    """Pairwise Pearson correlation between the rows of a K x G matrix."""
    means = np.asarray(means, dtype=float)
    variances = means.var(axis=1)
    dead = np.flatnonzero(variances == 0.0)
    if dead.size:
        raise DegenerateInputError(
            f"event row {dead[0]} has zero variance across the grid"
        )
    corr = np.corrcoef(means)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def outlier_scores(
    matrix: np.ndarray, labels: Sequence[Optional[TrainClass]]
) -> np.ndarray:
    """Per-event mean correlation with same-label events, self excluded.

    Events whose label group has fewer than 2 members score NaN.
    """
    k = matrix.shape[0]
    scores = np.full(k, np.nan)
    for i in range(k):
        peers = [
            j for j in range(k) if j != i and labels[j] is not None and labels[j] == labels[i]
        ]
        if peers:
            scores[i] = float(np.mean(matrix[i, peers]))
    return scores


def flag_outliers(
    matrix: np.ndarray,
    labels: Sequence[Optional[TrainClass]],
    event_ids: Sequence[str],
    score_floor: float = DEFAULT_SCORE_FLOOR,
    mad_multiplier: float = DEFAULT_MAD_MULTIPLIER,
    min_group_size: int = MIN_GROUP_SIZE,
) -> list[OutlierFlag]:
    """Flag events whose within-group score is anomalously low.

    An event is flagged when its score drops below the group median minus
    `mad_multiplier` times the group's median absolute deviation, or below
    the absolute `score_floor`.  Groups smaller than `min_group_size` are
    exempt from flagging.
    """
    scores = outlier_scores(matrix, labels)
    flags = []
    for i, event_id in enumerate(event_ids):
        label = labels[i]
        group = [j for j in range(len(event_ids)) if labels[j] == label]
        score = scores[i]
        flagged = False
        if label is not None and len(group) >= min_group_size and np.isfinite(score):
            group_scores = scores[group]
            median = float(np.median(group_scores))
            mad = float(np.median(np.abs(group_scores - median)))
            flagged = score < median - mad_multiplier * mad or score < score_floor
        flags.append(
            OutlierFlag(event_id=event_id, label=label, score=float(score), flagged=flagged)
        )
    return flags


def correlation_report(
    samples: PosteriorSamples,
    data: EventDataset,
    grid=None,
    score_floor: float = DEFAULT_SCORE_FLOOR,
    mad_multiplier: float = DEFAULT_MAD_MULTIPLIER,
) -> CorrelationReport:
    """Full monitoring report for a fitted dataset."""
    grid = default_grid() if grid is None else np.atleast_1d(np.asarray(grid, dtype=float))
    means = posterior_mean_matrix(samples, data, grid)
    matrix = pearson_correlation_matrix(means)
    labels = [e.label for e in data.events]
    event_ids = [e.event_id for e in data.events]
    flags = flag_outliers(
        matrix, labels, event_ids, score_floor=score_floor, mad_multiplier=mad_multiplier
    )
    return CorrelationReport(
        matrix=matrix, event_ids=event_ids, labels=labels, grid=grid, flags=flags
    )
