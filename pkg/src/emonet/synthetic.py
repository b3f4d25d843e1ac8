"""Ground-truth-known synthetic datasets with controllable label noise.

Class structure: each class "tunes" a subset of units, driving them with a
class-specific temporal bump on top of per-unit baseline rates.  The
separation knob scales the bump amplitude relative to the per-entry jitter,
which is what places baseline classifier accuracy where an experiment
needs it.  Samples are standardized per matrix, like pipeline output.

Label noise is a class-conditional transition matrix; an exact-count mode
flips a forced number of samples so tests need no binomial tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset, N_BINS, N_UNITS
from .errors import ConfigError, DataFormatError
from .rng import stream
from .spikes import standardize_values

DEFAULT_CLASS_NAMES = ("fear", "neutral", "happy")


@dataclass(frozen=True)
class ClassPrototype:
    """Mean response pattern and jitter scale for one class."""

    class_id: int
    mean_pattern: np.ndarray
    jitter_std: float
    active_units: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.mean_pattern)):
            raise DataFormatError(f"class {self.class_id}: non-finite mean pattern")
        if self.jitter_std < 0:
            raise DataFormatError(f"class {self.class_id}: jitter_std must be >= 0")


@dataclass(frozen=True)
class NoiseModel:
    """Row-stochastic transition matrix T[i][j] = P(observed j | true i)."""

    transition: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise DataFormatError(f"transition must be square, got shape {t.shape}")
        if np.any(t < 0):
            raise DataFormatError("transition entries must be >= 0")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9):
            raise DataFormatError("transition rows must sum to 1 (within 1e-9)")
        object.__setattr__(self, "transition", t)

    @property
    def n_classes(self) -> int:
        return self.transition.shape[0]

    @classmethod
    def identity(cls, m: int) -> "NoiseModel":
        return cls(np.eye(m))

    @classmethod
    def symmetric(cls, m: int, rate: float) -> "NoiseModel":
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"symmetric noise rate must be in [0, 1), got {rate}")
        if m < 2:
            raise ConfigError("symmetric noise needs >= 2 classes")
        t = np.full((m, m), rate / (m - 1))
        np.fill_diagonal(t, 1.0 - rate)
        return cls(t)

    def symmetric_rate(self) -> float:
        """Off-diagonal row mass, if the matrix has symmetric structure."""
        m = self.n_classes
        rate = 1.0 - self.transition[0, 0]
        expected = NoiseModel.symmetric(m, rate).transition if rate < 1.0 else None
        if expected is None or not np.allclose(self.transition, expected, atol=1e-12):
            raise ConfigError("exact-count mode needs a symmetric noise model")
        return rate

    def to_jsonable(self) -> list:
        return self.transition.tolist()


def make_prototypes(
    n_classes: int,
    separation: float = 1.0,
    jitter_std: float = 1.0,
    active_units: int = 6,
    envelope_width: float = 8.0,
    baseline_rate: float = 4.0,
    n_units: int = N_UNITS,
    n_bins: int = N_BINS,
    seed: int = 0,
) -> list[ClassPrototype]:
    """Build class prototypes with distinct tuned-unit sets and bump timings."""
    if n_classes < 2:
        raise ConfigError("need >= 2 classes")
    if active_units < 1 or active_units > n_units:
        raise ConfigError(f"active_units must be in 1..{n_units}")
    rng = stream(seed, "prototypes")
    base = baseline_rate * (0.5 + rng.random(n_units))  # per-unit baseline, shared
    bins = np.arange(n_bins)
    prototypes = []
    for c in range(n_classes):
        units = rng.choice(n_units, size=active_units, replace=False)
        center = n_bins * (c + 1) / (n_classes + 1)
        bump = np.exp(-0.5 * ((bins - center) / envelope_width) ** 2)
        mean = np.tile(base[:, None], (1, n_bins)).astype(np.float64)
        gains = separation * (0.5 + rng.random(active_units))
        mean[units] += np.outer(gains, bump) * baseline_rate
        prototypes.append(
            ClassPrototype(
                class_id=c,
                mean_pattern=mean,
                jitter_std=jitter_std,
                active_units=np.sort(units),
            )
        )
    return prototypes


def generate(
    prototypes: list[ClassPrototype],
    n_per_class: int,
    seed: int = 0,
    class_names: list[str] | None = None,
) -> LabeledDataset:
    """Sample a clean dataset: prototype mean + jitter, clipped at zero rate,
    standardized per matrix.  true_labels == noisy_labels on output."""
    if n_per_class < 1:
        raise ConfigError("n_per_class must be >= 1")
    if len(prototypes) < 2:
        raise ConfigError("need >= 2 prototypes")
    m = len(prototypes)
    if class_names is None:
        class_names = [
            DEFAULT_CLASS_NAMES[c] if m == len(DEFAULT_CLASS_NAMES) else f"class{c}"
            for c in range(m)
        ]
    if len(class_names) != m:
        raise ConfigError(f"{len(class_names)} class names for {m} classes")

    degenerate = all(p.jitter_std == 0 for p in prototypes) and all(
        np.array_equal(p.mean_pattern, prototypes[0].mean_pattern) for p in prototypes
    )
    if degenerate:
        warnings.warn("degenerate prototypes: identical means with zero jitter")

    shape = prototypes[0].mean_pattern.shape
    n = m * n_per_class
    features = np.empty((n,) + shape, dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    row = 0
    for proto in prototypes:
        for _ in range(n_per_class):
            rng = stream(seed, "sample", row)
            raw = proto.mean_pattern + proto.jitter_std * rng.standard_normal(shape)
            np.maximum(raw, 0.0, out=raw)
            z, _ = standardize_values(raw)
            features[row] = z
            labels[row] = proto.class_id
            row += 1

    return LabeledDataset(
        features=features,
        noisy_labels=labels.copy(),
        true_labels=labels.copy(),
        class_names=list(class_names),
        seed=seed,
        noise=None,
        extra={"degenerate_prototypes": degenerate},
    )


def inject_noise(
    ds: LabeledDataset,
    model: NoiseModel,
    seed: int = 0,
    exact_count: bool = False,
) -> LabeledDataset:
    """Corrupt labels through the transition matrix.

    Stochastic mode draws each observed label from its transition row.
    Exact-count mode (symmetric models only) flips exactly round(rate * n)
    uniformly-chosen samples to uniformly-chosen other classes, removing
    binomial variance from downstream assertions.
    """
    if ds.true_labels is None:
        raise DataFormatError("inject_noise needs a dataset with true labels")
    m = ds.n_classes
    if model.n_classes != m:
        raise ConfigError(f"noise model is {model.n_classes}-class, dataset is {m}-class")

    rng = stream(seed, "labelnoise")
    true = ds.true_labels
    noisy = true.copy()
    n = ds.n_samples

    if exact_count:
        rate = model.symmetric_rate()
        n_flip = int(np.rint(rate * n))
        flip_idx = rng.choice(n, size=n_flip, replace=False)
        # uniform over the m-1 wrong classes
        offsets = rng.integers(1, m, size=n_flip)
        noisy[flip_idx] = (true[flip_idx] + offsets) % m
    else:
        for c in range(m):
            idx = np.flatnonzero(true == c)
            if idx.size:
                noisy[idx] = rng.choice(m, size=idx.size, p=model.transition[c])

    flips = int(np.sum(noisy != true))
    noise_meta = {
        "kind": "exact_symmetric" if exact_count else "transition",
        "exact_count": exact_count,
        "transition": model.to_jsonable(),
        "realized_flips": flips,
        "realized_rate": flips / n,
        "seed": seed,
    }
    return LabeledDataset(
        features=ds.features.copy(),
        noisy_labels=noisy,
        true_labels=true.copy(),
        class_names=list(ds.class_names),
        seed=ds.seed,
        noise=noise_meta,
        extra=dict(ds.extra),
    )


def generate_clean_control(
    n_classes: int = 3,
    n_per_class: int = 500,
    seed: int = 0,
    separation: float = 1.6,
    jitter_std: float = 1.0,
    active_units: int = 6,
    envelope_width: float = 8.0,
    baseline_rate: float = 4.0,
    n_units: int = N_UNITS,
    n_bins: int = N_BINS,
    class_names: list[str] | None = None,
) -> LabeledDataset:
    """Zero-label-error control set with stronger class structure.

    Stands in for movement-style data whose labels are behaviorally
    verifiable: pruning it should not help, so ablations can show the
    cost of discarding clean samples.
    """
    protos = make_prototypes(
        n_classes,
        separation=separation,
        jitter_std=jitter_std,
        active_units=active_units,
        envelope_width=envelope_width,
        baseline_rate=baseline_rate,
        n_units=n_units,
        n_bins=n_bins,
        seed=seed,
    )
    ds = generate(protos, n_per_class, seed=seed, class_names=class_names)
    ds.extra["control"] = True
    return ds
