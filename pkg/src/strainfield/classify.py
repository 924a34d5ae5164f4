"""Route passing events to train-type groups from weigh-in-motion features.

The rule is a two-split decision tree: 16-axle trains are commuter stock,
split into 350s and 22x units by their average axle separation; everything
else is "other".  Axle weights play no role in the decision.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

SEPARATION_THRESHOLD_M = 5.3
COMMUTER_AXLE_COUNT = 16


class TrainClass(enum.Enum):
    TYPE_350 = "350"
    TYPE_22X = "22x"
    OTHER = "other"


@dataclass(frozen=True)
class BwimFeatures:
    """Axle configuration of one crossing, as reported by the BWIM system."""

    axle_count: int
    axle_weights: np.ndarray  # kN per axle
    axle_spacings: np.ndarray  # metres between consecutive axles

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.axle_weights, dtype=float))
        s = np.atleast_1d(np.asarray(self.axle_spacings, dtype=float))
        if self.axle_count < 1:
            raise ValueError(f"axle_count must be >= 1, got {self.axle_count}")
        if w.size != self.axle_count:
            raise ValueError(
                f"expected {self.axle_count} axle weights, got {w.size}"
            )
        if s.size != self.axle_count - 1:
            raise ValueError(
                f"expected {self.axle_count - 1} axle spacings, got {s.size}"
            )
        if np.any(w < 0):
            raise ValueError("axle weights must be non-negative")
        if s.size and not np.all(s > 0):
            raise ValueError("axle spacings must be positive")
        object.__setattr__(self, "axle_weights", w)
        object.__setattr__(self, "axle_spacings", s)


def mean_axle_separation(features: BwimFeatures) -> float:
    """Average spacing between consecutive axles, in metres."""
    if features.axle_count < 2:
        raise ValueError("mean axle separation needs at least 2 axles")
    return float(np.mean(features.axle_spacings))


def classify_event(features: BwimFeatures) -> TrainClass:
    """Decision tree over axle count and average separation.

    16 axles with mean separation strictly below 5.3 m is a 350; 16 axles
    otherwise is a 22x (ties at the threshold included); any other axle
    count is "other".
    """
    if features.axle_count != COMMUTER_AXLE_COUNT:
        return TrainClass.OTHER
    if mean_axle_separation(features) < SEPARATION_THRESHOLD_M:
        return TrainClass.TYPE_350
    return TrainClass.TYPE_22X
