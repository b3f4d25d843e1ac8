"""Spike preprocessing: timestamps -> standardized, augmented trial matrices.

Per-trial pipeline: bin each unit's spike times with a sliding window,
stack the 64 unit vectors into a (units x bins) matrix, z-score the matrix
over all entries, add small Gaussian noise to break exact zeros.  Dataset
augmentation then appends dropout-corrupted copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset, N_BINS, N_UNITS
from .errors import DataFormatError
from .rng import stream

# Treat a matrix as constant when its spread is this far below its scale.
_DEGENERATE_REL_STD = 1e-12

NOISE_MEAN = 1.0
NOISE_VAR = 0.005
DROPOUT_RATE = 0.08


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window layout for firing-rate extraction (times in ms)."""

    window_ms: float = 48.0
    step_ms: float = 16.0
    t_start_ms: float = -200.0
    t_end_ms: float = 1368.0

    def __post_init__(self):
        if self.window_ms <= 0 or self.step_ms <= 0:
            raise DataFormatError("window and step must be positive")
        span = self.t_end_ms - self.t_start_ms
        if span < self.window_ms:
            raise DataFormatError("extraction span shorter than one window")
        n, rem = divmod(span - self.window_ms, self.step_ms)
        if abs(rem) > 1e-9 and abs(rem - self.step_ms) > 1e-9:
            raise DataFormatError(
                f"span {span} minus window {self.window_ms} not divisible by step {self.step_ms}"
            )
        object.__setattr__(self, "_n_bins", int(round((span - self.window_ms) / self.step_ms)) + 1)

    @property
    def n_bins(self) -> int:
        return self._n_bins


@dataclass(frozen=True)
class SpikeTrain:
    """Spike times (ms, relative to stimulus onset) for one recorded unit."""

    unit_id: int
    timestamps: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)

    def validate(self, spec: WindowSpec):
        ts = self.timestamps
        if ts.ndim != 1:
            raise DataFormatError(f"unit {self.unit_id}: timestamps must be 1-D")
        if ts.size and np.any(np.diff(ts) <= 0):
            raise DataFormatError(f"unit {self.unit_id}: timestamps not strictly ascending")
        if ts.size and (ts[0] < spec.t_start_ms or ts[-1] > spec.t_end_ms):
            raise DataFormatError(
                f"unit {self.unit_id}: timestamps outside "
                f"[{spec.t_start_ms}, {spec.t_end_ms}] ms"
            )


@dataclass
class TrialMatrix:
    """One trial's (units x bins) grid of firing rates / z-scores."""

    values: np.ndarray
    label: int
    trial_id: int
    degenerate: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataFormatError(f"trial {self.trial_id}: values must be 2-D")


def bin_firing_rates(train: SpikeTrain, spec: WindowSpec = WindowSpec()) -> np.ndarray:
    """Firing rate (Hz) in each sliding window [start, start+window).

    Window k starts at ``t_start + k*step``; a spike exactly on the right
    edge belongs to the next window.
    """
    train.validate(spec)
    starts = spec.t_start_ms + np.arange(spec.n_bins) * spec.step_ms
    ts = train.timestamps
    counts = np.searchsorted(ts, starts + spec.window_ms, side="left") - np.searchsorted(
        ts, starts, side="left"
    )
    return counts / (spec.window_ms / 1000.0)


def assemble_trial(
    trains,
    spec: WindowSpec = WindowSpec(),
    label: int = 0,
    trial_id: int = 0,
    n_units: int = N_UNITS,
) -> TrialMatrix:
    """Stack per-unit rate vectors into a trial matrix, rows keyed by unit_id."""
    seen = {}
    for train in trains:
        if train.unit_id in seen:
            raise DataFormatError(f"duplicate unit_id {train.unit_id}")
        if not 0 <= train.unit_id < n_units:
            raise DataFormatError(f"unit_id {train.unit_id} outside 0..{n_units - 1}")
        seen[train.unit_id] = train
    missing = sorted(set(range(n_units)) - set(seen))
    if missing:
        raise DataFormatError(f"missing units: {missing}")
    values = np.stack([bin_firing_rates(seen[u], spec) for u in range(n_units)])
    return TrialMatrix(values=values, label=label, trial_id=trial_id)


def standardize(m: TrialMatrix) -> TrialMatrix:
    """Z-score over all entries (population std).

    A (numerically) constant matrix has no scale to divide by; it comes back
    all-zero with ``degenerate=True`` so silent trials survive the pipeline.
    """
    z, flag = standardize_values(m.values)
    return TrialMatrix(values=z, label=m.label, trial_id=m.trial_id, degenerate=flag)


def standardize_values(values: np.ndarray) -> tuple[np.ndarray, bool]:
    values = np.asarray(values, dtype=np.float64)
    mu = values.mean()
    sigma = values.std()
    if sigma <= _DEGENERATE_REL_STD * max(1.0, abs(mu)):
        return np.zeros_like(values), True
    return (values - mu) / sigma, False


def add_gaussian_noise(
    m: TrialMatrix,
    rng: np.random.Generator,
    mean: float = NOISE_MEAN,
    variance: float = NOISE_VAR,
) -> TrialMatrix:
    """Add independent Normal(mean, variance) draws to every entry."""
    if variance < 0:
        raise DataFormatError(f"variance must be >= 0, got {variance}")
    noise = rng.normal(mean, np.sqrt(variance), size=m.values.shape)
    return TrialMatrix(
        values=m.values + noise, label=m.label, trial_id=m.trial_id, degenerate=m.degenerate
    )


def dropout_augment(
    ds: LabeledDataset,
    rate: float = DROPOUT_RATE,
    copies: int = 1,
    seed: int = 0,
) -> LabeledDataset:
    """Append ``copies`` dropout-corrupted copies of every sample.

    Each copied entry is independently zeroed with probability ``rate``.
    Copies inherit their parent's labels; parent row indices are recorded in
    ``extra["augment"]``.  Each (parent, copy) pair draws from its own seed
    stream, so augmentation is order- and schedule-independent.
    """
    if not 0.0 <= rate < 1.0:
        raise DataFormatError(f"dropout rate must be in [0, 1), got {rate}")
    if copies < 0:
        raise DataFormatError(f"copies must be >= 0, got {copies}")
    if copies == 0:
        return ds.subset(np.arange(ds.n_samples))

    n = ds.n_samples
    appended = np.empty((n * copies,) + ds.features.shape[1:], dtype=ds.features.dtype)
    parents = np.arange(n * copies) // copies
    for row, parent in enumerate(parents):
        copy_idx = row % copies
        mask = stream(seed, "augment", int(parent), copy_idx).random(ds.features.shape[1:]) < rate
        appended[row] = ds.features[parent]
        appended[row][mask] = 0.0

    extra = dict(ds.extra)
    extra["augment"] = {
        "rate": rate,
        "copies": copies,
        "parent_ids": list(range(n)) + parents.tolist(),
    }
    return LabeledDataset(
        features=np.concatenate([ds.features, appended]),
        noisy_labels=np.concatenate([ds.noisy_labels, ds.noisy_labels[parents]]),
        true_labels=None
        if ds.true_labels is None
        else np.concatenate([ds.true_labels, ds.true_labels[parents]]),
        class_names=list(ds.class_names),
        seed=ds.seed,
        noise=ds.noise,
        extra=extra,
    )


def read_spike_file(path) -> dict[int, dict[int, list[float]]]:
    """Parse ``trial_id,unit_id,timestamp_ms`` rows into per-trial spike lists.

    Blank lines and ``#`` comments are skipped.  Units with no spikes simply
    never appear; assembly fills them in as silent.
    """
    trials: dict[int, dict[int, list[float]]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected trial_id,unit_id,timestamp_ms")
            try:
                trial, unit, t = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as e:
                raise DataFormatError(f"{path}:{lineno}: {e}") from e
            trials.setdefault(trial, {}).setdefault(unit, []).append(t)
    return trials


def read_label_file(path) -> dict[int, int]:
    """Parse ``trial_id,label`` rows."""
    labels: dict[int, int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected trial_id,label")
            trial, label = int(parts[0]), int(parts[1])
            if trial in labels:
                raise DataFormatError(f"{path}:{lineno}: duplicate trial {trial}")
            labels[trial] = label
    return labels


def spikes_to_dataset(
    spike_path,
    label_path,
    class_names: list[str],
    spec: WindowSpec = WindowSpec(),
    n_units: int = N_UNITS,
    seed: int = 0,
    noise_mean: float = NOISE_MEAN,
    noise_variance: float = NOISE_VAR,
) -> LabeledDataset:
    """Run the full per-trial pipeline over a raw spike/label file pair.

    Trials are processed in ascending trial_id order; per-trial noise comes
    from the stream keyed by the trial_id.
    """
    spikes = read_spike_file(spike_path)
    labels = read_label_file(label_path)
    missing = sorted(set(spikes) - set(labels))
    if missing:
        raise DataFormatError(f"trials with spikes but no label: {missing[:10]}")

    mats, ys = [], []
    degenerate = []
    for trial_id in sorted(labels):
        per_unit = spikes.get(trial_id, {})
        trains = [
            SpikeTrain(unit_id=u, timestamps=np.asarray(per_unit.get(u, []), dtype=np.float64))
            for u in range(n_units)
        ]
        m = assemble_trial(trains, spec, label=labels[trial_id], trial_id=trial_id)
        m = standardize(m)
        m = add_gaussian_noise(m, stream(seed, "noise", trial_id), noise_mean, noise_variance)
        if m.degenerate:
            degenerate.append(trial_id)
        mats.append(m.values)
        ys.append(m.label)

    if not mats:
        raise DataFormatError("no trials found")
    extra = {"source": "spikes", "degenerate_trials": degenerate}
    return LabeledDataset(
        features=np.stack(mats).astype(np.float32),
        noisy_labels=np.asarray(ys),
        true_labels=None,
        class_names=class_names,
        seed=seed,
        noise=None,
        extra=extra,
    )
