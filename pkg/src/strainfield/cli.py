"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .classify import TrainClass
from .config import load_config
from .errors import StrainfieldError
from .pipeline import (
    run_pipeline,
    stage_classify,
    stage_convert,
    stage_fit,
    stage_monitor,
    stage_predict,
    stage_simulate,
)

_CLASS_CHOICES = {"350": TrainClass.TYPE_350, "22x": TrainClass.TYPE_22X}


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main():
    """Multilevel GP modelling of train-passing strain events."""


@main.command()
@click.option("--class", "train_class", required=True, help="Train class: 350 or 22x.")
@click.option("--n", "n_events", type=int, default=10, show_default=True)
@click.option("--noise-sd", type=float, default=3.0, show_default=True,
              help="Observation noise, micro-strain.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def simulate(train_class, n_events, noise_sd, seed, out_dir):
    """Generate synthetic passing events in the raw event format."""
    if train_class not in _CLASS_CHOICES:
        raise click.UsageError(
            f"--class must be one of {sorted(_CLASS_CHOICES)}, got {train_class!r}"
        )
    if n_events < 1:
        raise click.UsageError("--n must be >= 1")
    try:
        paths = stage_simulate(out_dir, _CLASS_CHOICES[train_class], n_events, noise_sd, seed)
    except (StrainfieldError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {len(paths)} files to {out_dir}")


@main.command()
@click.option("--in", "raw_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
def convert(raw_dir, out_dir, config_path):
    """Convert raw wavelength events to normalized processed events."""
    try:
        config = load_config(config_path)
        paths, rejected = stage_convert(raw_dir, out_dir, config)
    except (StrainfieldError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {len(paths)} files to {out_dir}")
    for event_id, reason in rejected:
        click.echo(f"rejected {event_id}: {reason}", err=True)


@main.command()
@click.option("--in", "raw_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def classify(raw_dir, out_path):
    """Classify events by train type from their metadata sidecars."""
    try:
        stage_classify(raw_dir, out_path)
    except (StrainfieldError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--in", "processed_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--chains", type=int, default=None)
@click.option("--warmup", type=int, default=None)
@click.option("--samples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
def fit(processed_dir, out_dir, chains, warmup, samples, seed, config_path):
    """Sample the joint posterior over all processed events."""
    try:
        config = load_config(
            config_path,
            sampler_chains=chains,
            sampler_warmup=warmup,
            sampler_samples=samples,
            sampler_seed=seed,
        )
        paths = stage_fit(processed_dir, out_dir, config)
    except (StrainfieldError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {len(paths)} files to {out_dir}")


@main.command()
@click.option("--in", "processed_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--samples", "samples_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
def predict(processed_dir, samples_dir, out_path, config_path):
    """Write posterior predictive envelopes for every event."""
    try:
        config = load_config(config_path)
        stage_predict(processed_dir, samples_dir, out_path, config)
    except (StrainfieldError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--in", "processed_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--samples", "samples_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
def monitor(processed_dir, samples_dir, out_dir, config_path):
    """Emit the correlation matrix, outlier flags, and envelopes."""
    try:
        config = load_config(config_path)
        paths = stage_monitor(processed_dir, samples_dir, out_dir, config)
    except (StrainfieldError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {len(paths)} files to {out_dir}")


@main.command()
@click.option("--in", "raw_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
def pipeline(raw_dir, out_dir, seed, config_path):
    """Run classify, convert, fit, and monitor end to end with a manifest."""
    try:
        config = load_config(config_path, sampler_seed=seed)
        manifest = run_pipeline(raw_dir, out_dir, config)
    except (StrainfieldError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"pipeline complete; manifest hash {manifest['config_hash'][:12]}")


if __name__ == "__main__":
    sys.exit(main())
