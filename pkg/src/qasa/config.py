"""Run configuration: one YAML document covering every pipeline stage.

Unknown keys are rejected; CLI flags override file values; the fully resolved
config is echoed into every artifact so runs are reproducible from their
outputs alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .backtest import BacktestConfig
from .indicators import IndicatorConfig
from .labeling import LabelConfig
from .trainer import TrainConfig


@dataclass(frozen=True)
class DataConfig:
    forward_fill: bool = False
    bar_interval: int | None = None  # seconds; inferred from the file when None


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "sequence"  # "sequence" | "hybrid"
    window: int = 8
    n_layers: int = 2

    def __post_init__(self):
        if self.variant not in ("sequence", "hybrid"):
            raise ValueError(f"unknown model variant {self.variant!r}")
        if self.window < 1 or self.n_layers < 1:
            raise ValueError("window and n_layers must be >= 1")


@dataclass(frozen=True)
class SplitConfig:
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    indicators: IndicatorConfig = field(default_factory=IndicatorConfig)
    label: LabelConfig = field(default_factory=LabelConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    split: SplitConfig = field(default_factory=SplitConfig)

    def to_dict(self) -> dict:
        out: dict = {}
        for section in fields(self):
            value = getattr(self, section.name)
            out[section.name] = {
                f.name: _plain(getattr(value, f.name)) for f in fields(value)
            }
        return out


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


_SECTIONS = {
    "data": DataConfig,
    "indicators": IndicatorConfig,
    "label": LabelConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "backtest": BacktestConfig,
    "split": SplitConfig,
}

# fields that arrive from YAML as lists but are stored as tuples
_TUPLE_FIELDS = {"macd", "lag_set", "interaction_pairs", "fractions"}


def _build_section(cls, name: str, raw: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(
            f"unknown key(s) in config section {name!r}: {sorted(unknown)}"
        )
    kwargs = {}
    for key, value in raw.items():
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    return cls(**kwargs)


def from_mapping(raw: dict | None) -> RunConfig:
    """Build a validated RunConfig from a (possibly partial) nested mapping."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ValueError("config document must be a mapping")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config section(s): {sorted(unknown)}")
    sections = {}
    for name, cls in _SECTIONS.items():
        sub = raw.get(name, {})
        if not isinstance(sub, dict):
            raise ValueError(f"config section {name!r} must be a mapping")
        sections[name] = _build_section(cls, name, sub)
    return RunConfig(**sections)


def load(path: str | Path | None) -> RunConfig:
    """Load the YAML config; a missing path means all defaults."""
    if path is None:
        return RunConfig()
    raw = yaml.safe_load(Path(path).read_text())
    return from_mapping(raw)


def with_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    """Rebuild with per-section overrides keyed by (section, key); None is skipped."""
    raw = config.to_dict()
    for (section, key), value in overrides.items():
        if value is not None:
            raw[section][key] = value
    return from_mapping(raw)
