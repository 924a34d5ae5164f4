"""Synthetic train-passing events from superposed axle influence lines.

Real events from the monitored bridge are not redistributable, so end-to-end
verification runs on synthetic crossings: each axle drags a triangular
influence line across the span, the sensor sees the weighted sum, and
Gaussian noise is added on top.  Every simulated event keeps its noise-free
series attached for recovery tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .classify import BwimFeatures, TrainClass, classify_event
from .ingest import StrainEvent, StrainSeries

DEFAULT_SPAN_M = 26.8
DEFAULT_LEAD_DISTANCE_M = 20.0
MIN_SAMPLES = 750

# Nominal 16-axle commuter templates, chosen to straddle the 5.3 m
# classification threshold.
FLEET_TEMPLATES = {
    TrainClass.TYPE_350: {"axles": 16, "spacing_m": 4.8, "axle_weight_kn": 100.0},
    TrainClass.TYPE_22X: {"axles": 16, "spacing_m": 6.0, "axle_weight_kn": 100.0},
}


@dataclass(frozen=True)
class TrainSpec:
    """Axle layout and speed of one crossing."""

    axle_weights: np.ndarray  # kN per axle
    axle_positions: np.ndarray  # metres behind the leading axle, first = 0
    speed: float  # m/s
    name: TrainClass = TrainClass.OTHER

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.axle_weights, dtype=float))
        p = np.atleast_1d(np.asarray(self.axle_positions, dtype=float))
        if w.size != p.size:
            raise ValueError("axle_weights and axle_positions must match in length")
        if p[0] != 0.0 or (p.size > 1 and not np.all(np.diff(p) > 0)):
            raise ValueError("axle_positions must start at 0 and strictly increase")
        if np.any(w < 0):
            raise ValueError("axle weights must be non-negative")
        if not self.speed > 0:
            raise ValueError(f"speed must be positive, got {self.speed}")
        object.__setattr__(self, "axle_weights", w)
        object.__setattr__(self, "axle_positions", p)

    @property
    def features(self) -> BwimFeatures:
        return BwimFeatures(
            axle_count=int(self.axle_weights.size),
            axle_weights=self.axle_weights,
            axle_spacings=np.diff(self.axle_positions),
        )


@dataclass(frozen=True)
class BridgeSpec:
    """Simply-supported span with a single strain sensor."""

    span: float = DEFAULT_SPAN_M
    sensor_position: float = 0.5  # fraction of span
    influence_scale: float = 0.2  # micro-strain per kN at the influence peak

    def __post_init__(self):
        if not self.span > 0:
            raise ValueError(f"span must be positive, got {self.span}")
        if not 0.0 < self.sensor_position < 1.0:
            raise ValueError("sensor_position must lie strictly inside (0, 1)")
        if not self.influence_scale > 0:
            raise ValueError("influence_scale must be positive")


def influence_line(load_position, bridge: BridgeSpec):
    """Normalized triangular influence ordinate for a unit load.

    Zero at and beyond both supports, one when the load sits over the
    sensor, linear in between.
    """
    pos = np.asarray(load_position, dtype=float)
    peak = bridge.sensor_position * bridge.span
    rising = pos / peak
    falling = (bridge.span - pos) / (bridge.span - peak)
    out = np.clip(np.where(pos <= peak, rising, falling), 0.0, None)
    return out if out.ndim else float(out)


def clean_response(distance, train: TrainSpec, bridge: BridgeSpec):
    """Noise-free strain at first-axle travel `distance` past the record start.

    `distance` is measured from the start of the record, which sits
    DEFAULT_LEAD_DISTANCE_M ahead of the bridge entry.
    """
    d = np.atleast_1d(np.asarray(distance, dtype=float))
    axle_pos = d[:, None] - DEFAULT_LEAD_DISTANCE_M - train.axle_positions[None, :]
    contrib = influence_line(axle_pos, bridge) * train.axle_weights[None, :]
    out = bridge.influence_scale * contrib.sum(axis=1)
    return out if np.ndim(distance) else float(out[0])


def simulate_event(
    train: TrainSpec,
    bridge: BridgeSpec,
    noise_sd: float,
    sample_rate: float,
    seed: int,
    event_id: str = "",
    min_samples: int = MIN_SAMPLES,
) -> StrainEvent:
    """Simulate one crossing, returning a time-indexed strain event.

    The record spans a quiet lead-in, the full crossing (first-axle entry to
    last-axle exit), and a matching lead-out, so the series starts and ends
    at zero strain.  Noise is iid Gaussian in micro-strain.
    """
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be non-negative, got {noise_sd}")
    if not sample_rate > 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    total_distance = (
        bridge.span + train.axle_positions[-1] + 2.0 * DEFAULT_LEAD_DISTANCE_M
    )
    duration = total_distance / train.speed
    n = int(np.floor(duration * sample_rate)) + 1
    if n < min_samples:
        raise ValueError(
            f"sample_rate {sample_rate} Hz yields only {n} samples; "
            f"need at least {min_samples}"
        )
    t = np.arange(n) / sample_rate
    clean = clean_response(train.speed * t, train, bridge)
    rng = np.random.default_rng(seed)
    noisy = clean + rng.normal(0.0, noise_sd, size=n) if noise_sd > 0 else clean.copy()
    return StrainEvent(
        series=StrainSeries(x=t, y=noisy),
        speed=train.speed,
        features=train.features,
        event_id=event_id or f"sim-{seed}",
        ground_truth=StrainSeries(x=t, y=clean),
    )


def make_train(
    train_class: TrainClass, rng: np.random.Generator, speed_range=(25.0, 45.0)
) -> TrainSpec:
    """Draw one jittered train from a fleet template."""
    if train_class not in FLEET_TEMPLATES:
        raise ValueError(f"no fleet template for class {train_class}")
    tpl = FLEET_TEMPLATES[train_class]
    n_axles = tpl["axles"]
    weights = tpl["axle_weight_kn"] * rng.uniform(0.9, 1.1, size=n_axles)
    spacings = tpl["spacing_m"] * rng.uniform(0.98, 1.02, size=n_axles - 1)
    positions = np.concatenate(([0.0], np.cumsum(spacings)))
    speed = rng.uniform(*speed_range)
    return TrainSpec(
        axle_weights=weights, axle_positions=positions, speed=speed, name=train_class
    )


def make_fleet(
    train_class: TrainClass,
    n_events: int,
    seed: int,
    bridge: BridgeSpec | None = None,
    noise_sd: float = 3.0,
    target_samples: int = 800,
) -> list[StrainEvent]:
    """Generate a fleet of labelled events for one commuter class.

    Per-event randomness is derived from (seed, event index), so fleets are
    reproducible and order-independent.  Sample rates are chosen per event
    to land near `target_samples` regardless of the drawn speed.
    """
    if train_class not in FLEET_TEMPLATES:
        raise ValueError(f"cannot generate a fleet for class {train_class}")
    bridge = bridge or BridgeSpec()
    events = []
    for i in range(n_events):
        rng = np.random.default_rng([seed, i])
        train = make_train(train_class, rng)
        total_distance = (
            bridge.span + train.axle_positions[-1] + 2.0 * DEFAULT_LEAD_DISTANCE_M
        )
        sample_rate = target_samples * train.speed / total_distance
        event = simulate_event(
            train,
            bridge,
            noise_sd=noise_sd,
            sample_rate=sample_rate,
            seed=int(rng.integers(2**63)),
            event_id=f"{train_class.value}-{i:03d}",
            min_samples=min(MIN_SAMPLES, target_samples - 50),
        )
        label = classify_event(event.features)
        assert label == train_class, "fleet template escaped its own class"
        events.append(replace(event, label=label))
    return events


def inject_speed_error(event: StrainEvent, factor: float) -> StrainEvent:
    """Corrupt an event's recorded speed by a multiplicative factor.

    The strain record is untouched; only the speed used for the
    time-to-distance mapping changes, stretching or compressing the
    distance axis by `factor`.
    """
    if not factor > 0:
        raise ValueError(f"factor must be positive, got {factor}")
    if factor == 1.0:
        raise ValueError("factor 1.0 is not an error injection")
    return replace(event, speed=event.speed * factor)
