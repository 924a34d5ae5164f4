"""Posterior predictive envelopes for individual events."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hsgp import build_design_matrix
from .model import EventDataset
from .sampler import PosteriorSamples


@dataclass(frozen=True)
class PredictiveBand:
    """Pointwise posterior summary of one event's latent function."""

    grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    draws: np.ndarray  # (num_draws, len(grid))
    level: float


def _function_draws(
    samples: PosteriorSamples, data: EventDataset, event_index: int, grid: np.ndarray
) -> np.ndarray:
    """Latent-function draws f_k(grid), one row per posterior draw."""
    K, M = data.num_events, data.num_basis
    if not 0 <= event_index < K:
        raise ValueError(f"event index {event_index} out of range [0, {K})")
    design = build_design_matrix(grid, data.basis)
    flat = samples.draws.reshape(-1, samples.draws.shape[-1])
    alpha = flat[:, 0]
    ell = flat[:, 1]
    beta_k = flat[:, 2 + K + event_index * M : 2 + K + (event_index + 1) * M]

    lam = data.basis.eigenvalues
    c = (4.0 * 3.0**1.5 / ell[:, None] ** 3) * (
        3.0 / ell[:, None] ** 2 + lam[None, :]
    ) ** -2
    coef = alpha[:, None] * np.sqrt(c) * beta_k
    return coef @ design.entries.T


def posterior_predictive(
    samples: PosteriorSamples,
    data: EventDataset,
    event_index: int,
    grid,
    level: float = 0.9,
    include_noise: bool = False,
    rng: np.random.Generator | None = None,
) -> PredictiveBand:
    """Posterior mean and central credible band of one event's function.

    With include_noise=True each draw gets observation noise at that draw's
    own sigma_k added, turning the band into a predictive interval for new
    observations rather than for the latent function.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"credible level must lie in (0, 1), got {level}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    draws = _function_draws(samples, data, event_index, grid)
    if include_noise:
        rng = rng or np.random.default_rng(samples.config.seed)
        sigma_k = samples.flat(f"sigma_{event_index + 1}")
        draws = draws + rng.normal(size=draws.shape) * sigma_k[:, None]
    tail = 0.5 * (1.0 - level)
    lower, upper = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    return PredictiveBand(
        grid=grid,
        mean=draws.mean(axis=0),
        lower=lower,
        upper=upper,
        draws=draws,
        level=level,
    )
