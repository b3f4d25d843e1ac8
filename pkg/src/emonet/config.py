"""Run configuration: strict JSON parsing into typed sections.

Unknown keys are errors, not warnings: a typo in an experiment config must
fail loudly before anything trains.  Every results file embeds the parsed
config (``echo``), so runs can be replayed from their outputs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

MODES = ("baseline", "emo_p", "emo_r")


@dataclass
class NoiseSection:
    kind: str = "none"  # none | symmetric | matrix
    rate: float = 0.0
    exact_count: bool = True
    transition: list | None = None

    def validate(self):
        if self.kind not in ("none", "symmetric", "matrix"):
            raise ConfigError(f"noise.kind must be none|symmetric|matrix, got {self.kind!r}")
        if self.kind == "symmetric" and not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"noise.rate must be in [0, 1), got {self.rate}")
        if self.kind == "matrix" and self.transition is None:
            raise ConfigError("noise.kind 'matrix' needs noise.transition")


@dataclass
class AugmentSection:
    copies: int = 0
    rate: float = 0.08

    def validate(self):
        if self.copies < 0:
            raise ConfigError("augment.copies must be >= 0")
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"augment.rate must be in [0, 1), got {self.rate}")


@dataclass
class GenerateSection:
    n_classes: int = 3
    n_per_class: int = 500
    class_names: list | None = None
    separation: float = 1.0
    jitter_std: float = 1.0
    active_units: int = 6
    envelope_width: float = 8.0
    baseline_rate: float = 4.0
    n_units: int = 64
    n_bins: int = 96
    clean_control: bool = False
    noise: NoiseSection = field(default_factory=NoiseSection)
    augment: AugmentSection = field(default_factory=AugmentSection)

    def validate(self):
        if self.n_classes < 2:
            raise ConfigError("generate.n_classes must be >= 2")
        if self.n_per_class < 1:
            raise ConfigError("generate.n_per_class must be >= 1")
        self.noise.validate()
        self.augment.validate()


@dataclass
class ModelSection:
    hidden_sizes: list = field(default_factory=lambda: [256, 64])
    learning_rate: float = 0.001
    batch_size: int = 256
    epochs: int = 200
    optimizer: str = "adam"
    momentum: float = 0.9
    mean_mode: str = "nominal"

    def validate(self):
        if any(int(h) < 1 for h in self.hidden_sizes):
            raise ConfigError("model hidden sizes must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.optimizer not in ("adam", "momentum"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.mean_mode not in ("nominal", "effective"):
            raise ConfigError(f"unknown mean_mode {self.mean_mode!r}")


@dataclass
class CleaningSection:
    k_folds: int = 5
    score: str = "margin"
    method: str = "by_noise_rate"
    rank_fraction: float = 0.1
    aux: ModelSection = field(
        default_factory=lambda: ModelSection(hidden_sizes=[64], epochs=40)
    )

    def validate(self):
        if self.k_folds < 2:
            raise ConfigError("cleaning.k_folds must be >= 2")
        if self.score not in ("margin", "self_confidence"):
            raise ConfigError(f"unknown cleaning.score {self.score!r}")
        if self.method not in ("by_noise_rate", "by_rank_fraction"):
            raise ConfigError(f"unknown cleaning.method {self.method!r}")
        if not 0.0 <= self.rank_fraction <= 1.0:
            raise ConfigError("cleaning.rank_fraction must be in [0, 1]")
        self.aux.validate()

    def opts(self, renormalize_mean: bool = False) -> dict:
        return {
            "k_folds": self.k_folds,
            "score": self.score,
            "method": self.method,
            "rank_fraction": self.rank_fraction,
            "renormalize_mean": renormalize_mean,
        }


@dataclass
class WeightingSection:
    renormalize_mean: bool = False

    def validate(self):
        pass


@dataclass
class HarnessSection:
    cv_folds: int = 10
    ratios: list = field(default_factory=lambda: [round(0.05 * i, 2) for i in range(11)])
    seeds: int = 5
    test_fraction: float = 0.15

    def validate(self):
        if self.cv_folds < 2:
            raise ConfigError("harness.cv_folds must be >= 2")
        if self.seeds < 1:
            raise ConfigError("harness.seeds must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("harness.test_fraction must be in (0, 1)")


@dataclass
class DatasetSection:
    path: str | None = None
    eval_path: str | None = None

    def validate(self):
        pass


@dataclass
class RunConfig:
    seed: int = 0
    dataset: DatasetSection = field(default_factory=DatasetSection)
    generate: GenerateSection = field(default_factory=GenerateSection)
    model: ModelSection = field(default_factory=ModelSection)
    cleaning: CleaningSection = field(default_factory=CleaningSection)
    weighting: WeightingSection = field(default_factory=WeightingSection)
    harness: HarnessSection = field(default_factory=HarnessSection)

    def validate(self):
        for section in (
            self.dataset,
            self.generate,
            self.model,
            self.cleaning,
            self.weighting,
            self.harness,
        ):
            section.validate()


_SECTION_TYPES = {
    NoiseSection,
    AugmentSection,
    GenerateSection,
    ModelSection,
    CleaningSection,
    WeightingSection,
    HarnessSection,
    DatasetSection,
    RunConfig,
}


def _build(cls, data: dict, where: str, base=None):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    field_names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - field_names
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    base = cls() if base is None else base
    kwargs = {}
    for name, value in data.items():
        current = getattr(base, name)
        if type(current) in _SECTION_TYPES:
            kwargs[name] = _build(type(current), value, f"{where}.{name}", base=current)
        else:
            kwargs[name] = value
    try:
        return dataclasses.replace(base, **kwargs)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from e


def config_from_dict(data: dict) -> RunConfig:
    cfg = _build(RunConfig, data, "config")
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    return config_from_dict(data)


def config_echo(cfg: RunConfig) -> dict:
    """JSON-ready copy of the parsed config, embedded in every results file."""
    return dataclasses.asdict(cfg)
