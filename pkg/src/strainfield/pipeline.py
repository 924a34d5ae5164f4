"""File-to-file pipeline stages and the end-to-end run orchestration.

Each stage consumes only the declared artifacts of the previous stage, so
stages can run in separate processes.  A full run writes a manifest with
the configuration hash, root seed, and a checksum for every artifact; any
stage failure leaves a `.failed` marker naming the stage and cause.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from . import io as sfio
from .classify import TrainClass, classify_event
from .config import RunConfig
from .diagnostics import compute_diagnostics
from .hsgp import HsgpBasis
from .ingest import (
    RawFbgSeries,
    StrainEvent,
    compute_baseline,
    lowpass_filter,
    normalize_fleet,
    wavelength_to_microstrain,
)
from .model import EventDataset
from .monitoring import correlation_report
from .predictive import posterior_predictive
from .sampler import run_sampler
from .simulator import make_fleet


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _checksums(paths: list[Path]) -> dict[str, str]:
    return {str(Path(p).name): _sha256(p) for p in paths}


def monitoring_grid(config: RunConfig) -> np.ndarray:
    return np.linspace(
        config.monitoring_grid_min,
        config.monitoring_grid_max,
        config.monitoring_grid_points,
    )


def stage_simulate(
    out_dir: Path,
    train_class: TrainClass,
    n_events: int,
    noise_sd: float,
    seed: int,
) -> list[Path]:
    """Generate a fleet and write it in the raw event format."""
    events = make_fleet(train_class, n_events, seed=seed, noise_sd=noise_sd)
    paths = []
    for event in events:
        paths += sfio.write_raw_event(Path(out_dir), event)
    return paths


def stage_classify(raw_dir: Path, out_path: Path) -> Path:
    """Classify every raw event from its metadata sidecar."""
    rows = []
    for event_id in sfio.list_raw_event_ids(raw_dir):
        _, _, meta = sfio.read_raw_event(raw_dir, event_id)
        features = sfio.features_from_metadata(meta)
        rows.append((event_id, classify_event(features)))
    if not rows:
        raise ValueError(f"no raw events found in {raw_dir}")
    return sfio.write_classification(out_path, rows)


def stage_convert(
    raw_dir: Path, out_dir: Path, config: RunConfig
) -> tuple[list[Path], list[tuple[str, str]]]:
    """Raw wavelength files to normalized processed events.

    Conversion and filtering are per event; input standardization pools
    distance statistics over the whole directory, so all events land on one
    comparable scale.
    """
    events: list[StrainEvent] = []
    lambda0s: dict[str, float] = {}
    for event_id in sfio.list_raw_event_ids(raw_dir):
        t, wl, meta = sfio.read_raw_event(raw_dir, event_id)
        raw = RawFbgSeries(timestamps=t, wavelengths=wl, sensor_id=event_id)
        window = min(config.normalization_baseline_window, len(raw))
        lambda0 = compute_baseline(raw, window)
        series = wavelength_to_microstrain(
            raw, lambda0, gauge_factor=config.normalization_gauge_factor
        )
        if config.normalization_filter_window > 1:
            series = lowpass_filter(series, config.normalization_filter_window)
        features = sfio.features_from_metadata(meta)
        events.append(
            StrainEvent(
                series=series,
                speed=float(meta["speed_mps"]),
                features=features,
                event_id=event_id,
                label=classify_event(features),
            )
        )
        lambda0s[event_id] = lambda0
    if not events:
        raise ValueError(f"no raw events found in {raw_dir}")
    normalized, rejected = normalize_fleet(
        events, domain_half_width=config.basis_L, on_overflow="skip"
    )
    paths = []
    for event in normalized:
        params = dataclasses.replace(
            event.series.normalization, baseline_lambda0=lambda0s[event.event_id]
        )
        series = dataclasses.replace(event.series, normalization=params)
        paths += sfio.write_processed_event(out_dir, dataclasses.replace(event, series=series))
    return paths, rejected


def _load_dataset(processed_dir: Path, config: RunConfig) -> EventDataset:
    events = sfio.read_processed_events(processed_dir)
    if not events:
        raise ValueError(f"no processed events found in {processed_dir}")
    basis = HsgpBasis(L=config.basis_L, M=config.basis_M)
    return EventDataset(events, basis)


def stage_fit(
    processed_dir: Path, out_dir: Path, config: RunConfig, seed: int | None = None
) -> list[Path]:
    """Sample the joint posterior and persist draws plus diagnostics."""
    dataset = _load_dataset(processed_dir, config)
    samples = run_sampler(dataset, config.sampler_config(seed=seed))
    watched = ["alpha", "ell"] + [f"sigma_{k + 1}" for k in range(dataset.num_events)]
    diag = compute_diagnostics(samples, watched)
    summary = {
        "rhat": diag.rhat,
        "ess_bulk": diag.ess_bulk,
    }
    return sfio.write_samples(Path(out_dir), samples, diagnostics=summary)


def stage_predict(
    processed_dir: Path, samples_dir: Path, out_path: Path, config: RunConfig
) -> Path:
    """Posterior predictive envelopes for every event on the common grid."""
    dataset = _load_dataset(processed_dir, config)
    samples = sfio.read_samples(samples_dir)
    grid = monitoring_grid(config)
    bands = {}
    for k, event in enumerate(dataset.events):
        band = posterior_predictive(samples, dataset, k, grid)
        bands[event.event_id] = (band.mean, band.lower, band.upper)
    return sfio.write_envelopes(Path(out_path), grid, bands)


def stage_monitor(
    processed_dir: Path, samples_dir: Path, out_dir: Path, config: RunConfig
) -> list[Path]:
    """Correlation matrix, outlier flags, and envelopes for external plotting."""
    dataset = _load_dataset(processed_dir, config)
    samples = sfio.read_samples(samples_dir)
    grid = monitoring_grid(config)
    report = correlation_report(
        samples,
        dataset,
        grid=grid,
        score_floor=config.monitoring_score_floor,
        mad_multiplier=config.monitoring_mad_multiplier,
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        sfio.write_correlation(out_dir / "correlation.csv", report.matrix, report.event_ids),
        sfio.write_flags(out_dir / "flags.json", report.flags),
        stage_predict(processed_dir, samples_dir, out_dir / "envelopes.csv", config),
    ]
    return paths


def run_pipeline(raw_dir: Path, out_dir: Path, config: RunConfig, seed: int | None = None) -> dict:
    """Run every stage end to end, writing artifacts and a run manifest."""
    raw_dir = Path(raw_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": config.to_flat_dict(),
        "config_hash": config.config_hash(),
        "seed": config.sampler_seed if seed is None else seed,
        "stages": {},
        "rejected_events": [],
    }
    stage_name = None
    try:
        stage_name = "classify"
        path = stage_classify(raw_dir, out_dir / "classification.csv")
        manifest["stages"]["classify"] = _checksums([path])

        stage_name = "convert"
        processed_dir = out_dir / "processed"
        paths, rejected = stage_convert(raw_dir, processed_dir, config)
        manifest["stages"]["convert"] = _checksums(paths)
        manifest["rejected_events"] = [
            {"event_id": event_id, "reason": reason} for event_id, reason in rejected
        ]

        stage_name = "fit"
        samples_dir = out_dir / "samples"
        paths = stage_fit(processed_dir, samples_dir, config, seed=seed)
        manifest["stages"]["fit"] = _checksums(paths)

        stage_name = "monitor"
        monitor_dir = out_dir / "monitor"
        paths = stage_monitor(processed_dir, samples_dir, monitor_dir, config)
        manifest["stages"]["monitor"] = _checksums(paths)
    except Exception as exc:
        marker = out_dir / ".failed"
        marker.write_text(f"stage: {stage_name}\ncause: {exc}\n")
        raise
    manifest_path = out_dir / "run_manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
