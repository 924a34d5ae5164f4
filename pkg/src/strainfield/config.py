"""Run configuration: flat-key text files, environment lookup, hashing.

Config files are plain text, one `key = value` per line, `#` comments.
Keys are dotted (`basis.M = 40`).  Unknown keys are rejected so typos fail
loudly instead of silently falling back to defaults.  The environment
variable STRAINFIELD_CONFIG may point at a config file; explicit paths and
command-line flags take precedence.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .sampler import SamplerConfig

ENV_VAR = "STRAINFIELD_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    basis_L: float = 3.0
    basis_M: int = 40
    sampler_chains: int = 4
    sampler_warmup: int = 1000
    sampler_samples: int = 1000
    sampler_seed: int = 0
    sampler_target_acceptance: float = 0.8
    sampler_max_tree_depth: int = 10
    normalization_baseline_window: int = 100
    normalization_filter_window: int = 21
    normalization_gauge_factor: float = 0.78
    monitoring_grid_min: float = -2.5
    monitoring_grid_max: float = 2.5
    monitoring_grid_points: int = 201
    monitoring_score_floor: float = 0.8
    monitoring_mad_multiplier: float = 3.0

    def sampler_config(self, seed: int | None = None) -> SamplerConfig:
        return SamplerConfig(
            chains=self.sampler_chains,
            warmup_iterations=self.sampler_warmup,
            sampling_iterations=self.sampler_samples,
            seed=self.sampler_seed if seed is None else seed,
            target_acceptance=self.sampler_target_acceptance,
            max_tree_depth=self.sampler_max_tree_depth,
        )

    def to_flat_dict(self) -> dict:
        return {_field_to_key(f.name): getattr(self, f.name) for f in fields(self)}

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_flat_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


def _field_to_key(name: str) -> str:
    prefix, _, rest = name.partition("_")
    return f"{prefix}.{rest}"


def _key_to_field(key: str) -> str:
    return key.replace(".", "_", 1)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    return int(raw) if kind == "int" else float(raw)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat-key text into a {field_name: value} dict."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        name = _key_to_field(key)
        if name not in _FIELD_TYPES:
            raise ValueError(f"{source}:{lineno}: unknown configuration key {key!r}")
        try:
            values[name] = _coerce(name, raw)
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: bad value for {key!r}: {raw!r}") from exc
    return values


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Build a RunConfig from defaults, file, environment, and overrides.

    Precedence, lowest to highest: built-in defaults, the file named by
    STRAINFIELD_CONFIG, an explicitly given path, keyword overrides.
    """
    values: dict = {}
    env_path = os.environ.get(ENV_VAR)
    if env_path:
        values.update(parse_config_text(Path(env_path).read_text(), source=env_path))
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(), source=str(path)))
    config = RunConfig(**values)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        config = replace(config, **overrides)
    return config
