"""Experiment configuration: one nested record, strict about unknown keys."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import get_type_hints

from .adaptation import DsConfig, SyncConfig
from .wave import K_MAX_DEFAULT, K_MIN_DEFAULT, GridSpec

SEED_NAMES = ("field_seed", "input_seed", "noise_seed", "data_seed", "shuffle_seed")


class ConfigError(ValueError):
    """Invalid or unknown configuration entries."""


@dataclass(frozen=True)
class FieldConfig:
    c0: float = 300.0
    grad_per_row: float | None = None
    c_noise_amp: float = 0.8
    k0: float = 0.003
    k_min: float = K_MIN_DEFAULT
    k_max: float = K_MAX_DEFAULT


@dataclass(frozen=True)
class ReservoirConfig:
    alpha: float = 0.03
    input_gain: float = 10.0
    noise_amp: float = 1e-3


@dataclass(frozen=True)
class TrainSection:
    learning_rate: float = 0.01
    epochs: int = 20
    horizon_steps: int = 33
    warmup_steps: int = 100
    min_rel_improvement: float = 1e-3
    batch_size: int = 4


@dataclass(frozen=True)
class DataSection:
    n_samples: int = 1000
    bpm_range: tuple[float, float] = (66.0, 168.0)
    nonrhythmic_fraction: float = 0.25
    duration_s: float = 30.0
    pulse_width_s: float = 0.06


@dataclass(frozen=True)
class BaselineConfig:
    density: float = 0.01
    spectral_radius: float = 0.95


@dataclass(frozen=True)
class EvalConfig:
    settle_steps: int = 500
    rel_height: float = 0.3
    min_separation_frac: float = 0.5
    max_lag_s: float = 0.5
    score_from_s: float = 10.0


@dataclass(frozen=True)
class Seeds:
    field_seed: int = 0
    input_seed: int = 0
    noise_seed: int = 0
    data_seed: int = 0
    shuffle_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    fields: FieldConfig = field(default_factory=FieldConfig)
    reservoir: ReservoirConfig = field(default_factory=ReservoirConfig)
    train: TrainSection = field(default_factory=TrainSection)
    sync: SyncConfig = field(default_factory=SyncConfig)
    ds: DsConfig = field(default_factory=DsConfig)
    dataset: DataSection = field(default_factory=DataSection)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seeds: Seeds = field(default_factory=Seeds)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seeds(self, **overrides) -> "ExperimentConfig":
        unknown = set(overrides) - set(SEED_NAMES)
        if unknown:
            raise ConfigError(f"unknown seed names: {sorted(unknown)}")
        return replace(self, seeds=replace(self.seeds, **overrides))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    hints = get_type_hints(cls)
    names = {f.name for f in fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = hints[key]
        if isinstance(sub, type) and is_dataclass(sub):
            kwargs[key] = _build(sub, value, f"{where}.{key}")
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{where}: {err}") from err


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "config")


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from err
    return config_from_dict(data)
