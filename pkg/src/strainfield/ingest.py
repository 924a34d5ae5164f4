"""Raw FBG wavelength series to normalized strain envelopes.

The chain is: baseline wavelength -> micro-strain conversion -> smoothing ->
time-to-distance mapping -> standardization onto the model's input/response
scale.  Every step is a pure function; nothing mutates its input.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .classify import BwimFeatures, TrainClass
from .errors import DegenerateInputError, DomainOverflowError

DEFAULT_GAUGE_FACTOR = 0.78
DEFAULT_BASELINE_WINDOW = 100
DEFAULT_FILTER_WINDOW = 21
DOMAIN_HALF_WIDTH = 3.0


@dataclass(frozen=True)
class RawFbgSeries:
    """One sensor's raw record for a single passing event."""

    timestamps: np.ndarray  # seconds, strictly increasing
    wavelengths: np.ndarray  # nanometres
    sensor_id: str = ""

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        w = np.asarray(self.wavelengths, dtype=float)
        if t.shape != w.shape or t.ndim != 1:
            raise ValueError("timestamps and wavelengths must be 1-D of equal length")
        if t.size < 2:
            raise ValueError("raw series needs at least 2 samples")
        if not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise ValueError("wavelengths must be finite and positive")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "wavelengths", w)

    def __len__(self) -> int:
        return self.timestamps.size


@dataclass(frozen=True)
class NormalizationParams:
    """Affine maps taking one event onto the common modelling scale."""

    x_mean: float
    x_sd: float
    y_scale: float
    baseline_lambda0: float = float("nan")

    def __post_init__(self):
        if not self.x_sd > 0:
            raise ValueError(f"x_sd must be positive, got {self.x_sd}")
        if not self.y_scale > 0:
            raise ValueError(f"y_scale must be positive, got {self.y_scale}")


@dataclass(frozen=True)
class StrainSeries:
    """Strain as a function of time or passing distance.

    `x` is seconds straight after conversion, metres after the distance
    mapping, and dimensionless once normalized (`normalization` set).
    """

    x: np.ndarray
    y: np.ndarray
    normalization: Optional[NormalizationParams] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-D of equal length")
        if x.size >= 2 and not np.all(np.diff(x) > 0):
            raise ValueError("x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class StrainEvent:
    """One passing event: its strain series plus crossing metadata.

    `ground_truth`, when present, is the noise-free series the simulator
    generated the event from; real events never carry one.
    """

    series: StrainSeries
    speed: float  # metres/second
    features: BwimFeatures
    event_id: str
    label: Optional[TrainClass] = None
    ground_truth: Optional[StrainSeries] = None

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError(f"speed must be positive, got {self.speed}")


def compute_baseline(raw: RawFbgSeries, window_samples: int = DEFAULT_BASELINE_WINDOW) -> float:
    """Reference wavelength: mean of the first `window_samples` readings.

    The window should end before the train reaches the bridge so the
    baseline reflects the unloaded structure.
    """
    if window_samples < 1:
        raise ValueError(f"window_samples must be >= 1, got {window_samples}")
    if window_samples > len(raw):
        raise ValueError(
            f"window_samples {window_samples} exceeds series length {len(raw)}"
        )
    return float(np.mean(raw.wavelengths[:window_samples]))


def wavelength_to_microstrain(
    raw: RawFbgSeries,
    lambda0: float,
    gauge_factor: float = DEFAULT_GAUGE_FACTOR,
) -> StrainSeries:
    """Convert wavelength shifts to micro-strain relative to `lambda0`.

    delta_ue = (1/k) * (delta_lambda / lambda0) * 1e6 with gauge factor k.
    The 1e6 factor expresses the relative shift in micro-strain units.
    """
    if not gauge_factor > 0:
        raise ValueError(f"gauge_factor must be positive, got {gauge_factor}")
    if not lambda0 > 0:
        raise ValueError(f"lambda0 must be positive, got {lambda0}")
    dl = raw.wavelengths - lambda0
    y = (dl / lambda0) * 1e6 / gauge_factor
    return StrainSeries(x=raw.timestamps.copy(), y=y)


def lowpass_filter(series: StrainSeries, window_samples: int = DEFAULT_FILTER_WINDOW) -> StrainSeries:
    """Zero-phase moving average with truncated windows at the edges.

    Interior sample i averages y[i-h : i+h+1] with h = (window-1)//2; near
    the edges the window is clipped to the available samples, so the output
    has the same length as the input and constants pass through unchanged.
    """
    n = len(series)
    if window_samples < 1 or window_samples % 2 == 0:
        raise ValueError(f"window_samples must be odd and >= 1, got {window_samples}")
    if window_samples > n:
        raise ValueError(f"window_samples {window_samples} exceeds series length {n}")
    h = (window_samples - 1) // 2
    if h == 0:
        return replace(series, y=series.y.copy())
    csum = np.concatenate(([0.0], np.cumsum(series.y)))
    idx = np.arange(n)
    lo = np.maximum(idx - h, 0)
    hi = np.minimum(idx + h, n - 1)
    y = (csum[hi + 1] - csum[lo]) / (hi - lo + 1)
    return replace(series, y=y)


def time_to_distance(series: StrainSeries, speed: float) -> StrainSeries:
    """Rescale the time axis to passing distance: x = speed * (t - t0)."""
    if not speed > 0:
        raise ValueError(f"speed must be positive, got {speed}")
    x = speed * (series.x - series.x[0])
    return replace(series, x=x)


def normalize_event(
    series: StrainSeries,
    baseline_lambda0: float = float("nan"),
    domain_half_width: float = DOMAIN_HALF_WIDTH,
) -> tuple[StrainSeries, NormalizationParams]:
    """Standardize one event's inputs and scale its response to unit peak.

    x is z-scored with the population standard deviation; y is divided by
    its largest absolute value.  Events whose standardized inputs escape
    [-domain_half_width, domain_half_width] cannot be represented inside
    the model's compact domain and are rejected here, before fitting.
    """
    if len(series) < 2:
        raise ValueError("normalization needs at least 2 samples")
    x_mean = float(np.mean(series.x))
    x_sd = float(np.std(series.x))
    if x_sd == 0.0:
        raise DegenerateInputError("input grid is constant; cannot standardize")
    y_scale = float(np.max(np.abs(series.y)))
    if y_scale == 0.0:
        raise DegenerateInputError("response is identically zero; cannot scale")
    xn = (series.x - x_mean) / x_sd
    if np.max(np.abs(xn)) > domain_half_width:
        raise DomainOverflowError(
            f"normalized inputs exceed [-{domain_half_width}, {domain_half_width}]"
        )
    params = NormalizationParams(
        x_mean=x_mean, x_sd=x_sd, y_scale=y_scale, baseline_lambda0=baseline_lambda0
    )
    out = StrainSeries(x=xn, y=series.y / y_scale, normalization=params)
    return out, params


def apply_normalization(series: StrainSeries, params: NormalizationParams) -> StrainSeries:
    """Apply a fixed, previously computed normalization to a series."""
    xn = (series.x - params.x_mean) / params.x_sd
    return StrainSeries(x=xn, y=series.y / params.y_scale, normalization=params)


def normalize_fleet(
    events: list[StrainEvent],
    domain_half_width: float = DOMAIN_HALF_WIDTH,
    on_overflow: str = "raise",
) -> tuple[list[StrainEvent], list[tuple[str, str]]]:
    """Map a fleet of time-indexed events onto the common modelling scale.

    The distance axis is standardized with statistics pooled across the
    whole fleet, not per event.  Per-event standardization is an affine map
    of each event's own grid and would silently cancel any multiplicative
    error in the recorded speed, hiding exactly the kind of corrupted event
    monitoring is meant to expose.  Response scaling stays per event
    (largest absolute value to 1).

    Returns the normalized events and a list of (event_id, reason) pairs
    for events whose standardized inputs leave the compact domain; with
    on_overflow="raise" the first such event raises instead.
    """
    if not events:
        raise ValueError("normalize_fleet needs at least one event")
    if on_overflow not in ("raise", "skip"):
        raise ValueError(f"unknown on_overflow mode {on_overflow!r}")
    distance_series = [time_to_distance(e.series, e.speed) for e in events]
    pooled = np.concatenate([s.x for s in distance_series])
    x_mean = float(np.mean(pooled))
    x_sd = float(np.std(pooled))
    if x_sd == 0.0:
        raise DegenerateInputError("pooled input grid is constant")
    normalized: list[StrainEvent] = []
    rejected: list[tuple[str, str]] = []
    for event, series in zip(events, distance_series):
        y_scale = float(np.max(np.abs(series.y)))
        if y_scale == 0.0:
            raise DegenerateInputError(
                f"event {event.event_id}: response is identically zero"
            )
        params = NormalizationParams(x_mean=x_mean, x_sd=x_sd, y_scale=y_scale)
        xn = (series.x - x_mean) / x_sd
        if np.max(np.abs(xn)) > domain_half_width:
            reason = (
                f"normalized inputs exceed [-{domain_half_width}, "
                f"{domain_half_width}] (max |x| = {np.max(np.abs(xn)):.3f})"
            )
            if on_overflow == "raise":
                raise DomainOverflowError(f"event {event.event_id}: {reason}")
            rejected.append((event.event_id, reason))
            continue
        new_series = StrainSeries(x=xn, y=series.y / y_scale, normalization=params)
        ground_truth = event.ground_truth
        if ground_truth is not None:
            gt_distance = time_to_distance(ground_truth, event.speed)
            ground_truth = StrainSeries(
                x=(gt_distance.x - x_mean) / x_sd,
                y=gt_distance.y / y_scale,
                normalization=params,
            )
        normalized.append(
            replace(event, series=new_series, ground_truth=ground_truth)
        )
    return normalized, rejected


def denormalize_prediction(
    x: np.ndarray, y: np.ndarray, params: NormalizationParams
) -> tuple[np.ndarray, np.ndarray]:
    """Invert the normalization maps: back to metres and micro-strain."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x * params.x_sd + params.x_mean, y * params.y_scale
