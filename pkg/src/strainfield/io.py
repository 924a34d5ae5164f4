"""On-disk formats: raw event files, processed events, samples, reports.

Raw events are pairs of files per event: `<id>.csv` with columns
`t_s,lambda_nm` and `<id>.json` carrying crossing metadata.  Processed
events use `<id>.processed.csv` with columns `x,y` plus `<id>.norm.json`
holding the normalization parameters and label.  Posterior draws go to one
wide CSV with a JSON diagnostics summary next to it.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .classify import BwimFeatures, TrainClass
from .ingest import (
    DEFAULT_GAUGE_FACTOR,
    NormalizationParams,
    StrainEvent,
    StrainSeries,
)
from .sampler import PosteriorSamples, SamplerConfig

REFERENCE_LAMBDA_NM = 1550.0


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])


def _read_csv(path: Path, expected_header: list[str]) -> list[np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != expected_header:
            raise ValueError(f"{path}: expected header {expected_header}, got {header}")
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=float)
    return [data[:, i] for i in range(len(expected_header))]


def microstrain_to_wavelength(
    microstrain: np.ndarray,
    lambda0: float = REFERENCE_LAMBDA_NM,
    gauge_factor: float = DEFAULT_GAUGE_FACTOR,
) -> np.ndarray:
    """Inverse of the strain conversion, for writing synthetic raw files."""
    return lambda0 * (1.0 + gauge_factor * np.asarray(microstrain) * 1e-6)


def write_raw_event(directory: Path, event: StrainEvent) -> list[Path]:
    """Write one time-indexed event as a raw wavelength CSV plus metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{event.event_id}.csv"
    _write_csv(
        csv_path,
        ["t_s", "lambda_nm"],
        [event.series.x, microstrain_to_wavelength(event.series.y)],
    )
    meta_path = directory / f"{event.event_id}.json"
    meta = {
        "event_id": event.event_id,
        "speed_mps": event.speed,
        "axle_count": int(event.features.axle_count),
        "axle_weights_kn": [float(w) for w in event.features.axle_weights],
        "axle_spacings_m": [float(s) for s in event.features.axle_spacings],
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return [csv_path, meta_path]


def read_raw_event(directory: Path, event_id: str) -> tuple[np.ndarray, np.ndarray, dict]:
    """Read one raw event; returns (timestamps, wavelengths, metadata)."""
    directory = Path(directory)
    t, wl = _read_csv(directory / f"{event_id}.csv", ["t_s", "lambda_nm"])
    with open(directory / f"{event_id}.json") as fh:
        meta = json.load(fh)
    return t, wl, meta


def list_raw_event_ids(directory: Path) -> list[str]:
    directory = Path(directory)
    ids = sorted(
        p.stem for p in directory.glob("*.json") if not p.stem.endswith(".norm")
    )
    return [i for i in ids if (directory / f"{i}.csv").exists()]


def features_from_metadata(meta: dict) -> BwimFeatures:
    return BwimFeatures(
        axle_count=int(meta["axle_count"]),
        axle_weights=np.asarray(meta["axle_weights_kn"], dtype=float),
        axle_spacings=np.asarray(meta["axle_spacings_m"], dtype=float),
    )


def write_processed_event(directory: Path, event: StrainEvent) -> list[Path]:
    """Write one normalized event plus its normalization sidecar."""
    if event.series.normalization is None:
        raise ValueError(f"event {event.event_id} is not normalized")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{event.event_id}.processed.csv"
    _write_csv(csv_path, ["x", "y"], [event.series.x, event.series.y])
    params = event.series.normalization
    sidecar = {
        "event_id": event.event_id,
        "label": event.label.value if event.label is not None else None,
        "speed_mps": event.speed,
        "normalization": {
            "x_mean": params.x_mean,
            "x_sd": params.x_sd,
            "y_scale": params.y_scale,
            "baseline_lambda0": params.baseline_lambda0,
        },
    }
    side_path = directory / f"{event.event_id}.norm.json"
    with open(side_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, allow_nan=True)
        fh.write("\n")
    return [csv_path, side_path]


def read_processed_events(directory: Path) -> list[StrainEvent]:
    """Load every processed event in a directory, sorted by event id."""
    directory = Path(directory)
    events = []
    for side_path in sorted(directory.glob("*.norm.json")):
        with open(side_path) as fh:
            sidecar = json.load(fh)
        event_id = sidecar["event_id"]
        x, y = _read_csv(directory / f"{event_id}.processed.csv", ["x", "y"])
        norm = sidecar["normalization"]
        params = NormalizationParams(
            x_mean=norm["x_mean"],
            x_sd=norm["x_sd"],
            y_scale=norm["y_scale"],
            baseline_lambda0=norm.get("baseline_lambda0") or float("nan"),
        )
        label = TrainClass(sidecar["label"]) if sidecar.get("label") else None
        placeholder = BwimFeatures(
            axle_count=1, axle_weights=np.array([0.0]), axle_spacings=np.array([])
        )
        events.append(
            StrainEvent(
                series=StrainSeries(x=x, y=y, normalization=params),
                speed=sidecar.get("speed_mps", 1.0),
                features=placeholder,
                event_id=event_id,
                label=label,
            )
        )
    return events


def write_samples(
    directory: Path, samples: PosteriorSamples, diagnostics: dict | None = None
) -> list[Path]:
    """Write draws as a wide CSV plus a JSON diagnostics summary."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / "samples.csv"
    chains, iters, dim = samples.draws.shape
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain", "iter"] + samples.names)
        for c in range(chains):
            for i in range(iters):
                writer.writerow(
                    [c, i] + [repr(float(v)) for v in samples.draws[c, i]]
                )
    summary = {
        "chains": chains,
        "iterations": iters,
        "divergence_count": samples.divergence_count,
        "warnings": samples.warnings,
        "config": {
            "chains": samples.config.chains,
            "warmup_iterations": samples.config.warmup_iterations,
            "sampling_iterations": samples.config.sampling_iterations,
            "seed": samples.config.seed,
            "target_acceptance": samples.config.target_acceptance,
            "max_tree_depth": samples.config.max_tree_depth,
        },
    }
    if diagnostics:
        summary.update(diagnostics)
    json_path = directory / "diagnostics.json"
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return [csv_path, json_path]


def read_samples(directory: Path) -> PosteriorSamples:
    """Reload draws written by write_samples.

    Per-iteration sampler diagnostics are not serialized; the reloaded
    object carries zeroed divergence/depth/energy arrays.
    """
    directory = Path(directory)
    with open(directory / "diagnostics.json") as fh:
        summary = json.load(fh)
    cfg = summary["config"]
    config = SamplerConfig(
        chains=cfg["chains"],
        warmup_iterations=cfg["warmup_iterations"],
        sampling_iterations=cfg["sampling_iterations"],
        seed=cfg["seed"],
        target_acceptance=cfg["target_acceptance"],
        max_tree_depth=cfg["max_tree_depth"],
    )
    with open(directory / "samples.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = header[2:]
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows)
    chains = int(data[:, 0].max()) + 1
    iters = int(data[:, 1].max()) + 1
    draws = data[:, 2:].reshape(chains, iters, len(names))
    zeros = np.zeros((chains, iters))
    return PosteriorSamples(
        draws=draws,
        names=names,
        divergent=zeros.astype(bool),
        tree_depth=zeros.astype(int),
        energy=zeros,
        config=config,
        warnings=summary.get("warnings", []),
    )


def write_classification(path: Path, rows: list[tuple[str, TrainClass]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event_id", "class"])
        for event_id, label in rows:
            writer.writerow([event_id, label.value])
    return path


def write_correlation(path: Path, matrix: np.ndarray, event_ids: list[str]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event_id"] + list(event_ids))
        for event_id, row in zip(event_ids, matrix):
            writer.writerow([event_id] + [repr(float(v)) for v in row])
    return path


def write_flags(path: Path, flags) -> Path:
    path = Path(path)
    payload = [
        {
            "event_id": f.event_id,
            "label": f.label.value if f.label is not None else None,
            "score": f.score,
            "flagged": bool(f.flagged),
        }
        for f in flags
    ]
    meta = {
        "rule": "score < group median - 3*MAD, or score < floor; "
        "threshold values are configuration, not a calibrated detector",
        "flags": payload,
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return path


def write_envelopes(path: Path, grid: np.ndarray, bands: dict[str, tuple]) -> Path:
    """Columns: grid, then mean/lower/upper per event id."""
    path = Path(path)
    header = ["grid"]
    columns = [np.asarray(grid, dtype=float)]
    for event_id, (mean, lower, upper) in bands.items():
        header += [f"mean_{event_id}", f"lower_{event_id}", f"upper_{event_id}"]
        columns += [mean, lower, upper]
    _write_csv(path, header, columns)
    return path
