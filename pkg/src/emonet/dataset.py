"""Labeled trial datasets and their on-disk directory format.

A dataset directory holds:

* ``manifest.json``  -- format_version, shape, class names, provenance
* ``features.f32le`` -- little-endian float32, row-major (sample, unit, bin)
* ``labels.u8``      -- one byte per sample (the possibly-noisy labels)
* ``true_labels.u8`` -- optional, synthetic data only

Features are kept as float32 in memory so a load/save cycle is bit-exact.
Training code widens to float64 at the point of use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError

FORMAT_VERSION = 1
N_UNITS = 64
N_BINS = 96

_MANIFEST_KEYS = {
    "format_version",
    "n_samples",
    "n_units",
    "n_bins",
    "class_names",
    "seed",
    "noise",
    "has_true_labels",
    "extra",
}


@dataclass
class LabeledDataset:
    """Trial feature matrices with observed labels and optional hidden truth.

    ``features`` has shape (n, n_units, n_bins).  ``true_labels`` is only
    present for synthetic data, where it lets experiments score label-error
    recovery against ground truth.
    """

    features: np.ndarray
    noisy_labels: np.ndarray
    true_labels: np.ndarray | None
    class_names: list[str]
    seed: int | None = None
    noise: dict | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.noisy_labels = np.asarray(self.noisy_labels, dtype=np.int64)
        if self.true_labels is not None:
            self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
        self.validate()

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def validate(self):
        if self.features.ndim != 3:
            raise DataFormatError(
                f"features must be (n, units, bins), got shape {self.features.shape}"
            )
        n = self.features.shape[0]
        if self.noisy_labels.shape != (n,):
            raise DataFormatError(
                f"{len(self.noisy_labels)} labels for {n} samples"
            )
        if self.true_labels is not None and self.true_labels.shape != (n,):
            raise DataFormatError(
                f"{len(self.true_labels)} true labels for {n} samples"
            )
        m = self.n_classes
        if m < 2 or m > 255:
            raise DataFormatError(f"need 2..255 classes, got {m}")
        for name, arr in (("labels", self.noisy_labels), ("true_labels", self.true_labels)):
            if arr is not None and arr.size and (arr.min() < 0 or arr.max() >= m):
                raise DataFormatError(f"{name} outside 0..{m - 1}")
        if not np.all(np.isfinite(self.features)):
            raise DataFormatError("features contain non-finite values")
        if self.true_labels is not None and self.noise is not None:
            recorded = self.noise.get("realized_flips")
            actual = int(np.sum(self.noisy_labels != self.true_labels))
            if recorded is not None and recorded != actual:
                raise DataFormatError(
                    f"noise metadata records {recorded} flips but data has {actual}"
                )

    def flat_features(self, dtype=np.float64) -> np.ndarray:
        """Features flattened to (n, units*bins) in the given dtype."""
        n = self.n_samples
        return self.features.reshape(n, -1).astype(dtype)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.noisy_labels, minlength=self.n_classes)

    def subset(self, indices) -> "LabeledDataset":
        """New dataset holding the given rows (copy, original untouched)."""
        indices = np.asarray(indices)
        noise = None
        if self.noise is not None:
            noise = dict(self.noise)
            if self.true_labels is not None:
                flips = int(np.sum(self.noisy_labels[indices] != self.true_labels[indices]))
                noise["realized_flips"] = flips
                noise["realized_rate"] = flips / max(1, len(indices))
        return LabeledDataset(
            features=self.features[indices].copy(),
            noisy_labels=self.noisy_labels[indices].copy(),
            true_labels=None if self.true_labels is None else self.true_labels[indices].copy(),
            class_names=list(self.class_names),
            seed=self.seed,
            noise=noise,
            extra=dict(self.extra),
        )


def save_dataset(ds: LabeledDataset, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n, units, bins = ds.features.shape
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_samples": n,
        "n_units": units,
        "n_bins": bins,
        "class_names": ds.class_names,
        "seed": ds.seed,
        "noise": ds.noise,
        "has_true_labels": ds.true_labels is not None,
        "extra": ds.extra,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    (path / "features.f32le").write_bytes(
        np.ascontiguousarray(ds.features, dtype="<f4").tobytes()
    )
    (path / "labels.u8").write_bytes(ds.noisy_labels.astype(np.uint8).tobytes())
    if ds.true_labels is not None:
        (path / "true_labels.u8").write_bytes(ds.true_labels.astype(np.uint8).tobytes())


def load_dataset(path) -> LabeledDataset:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise DataFormatError(f"no manifest.json in {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise DataFormatError(f"manifest.json is not valid JSON: {e}") from e

    unknown = set(manifest) - _MANIFEST_KEYS
    if unknown:
        raise DataFormatError(f"unknown manifest keys: {sorted(unknown)}")
    missing = _MANIFEST_KEYS - set(manifest)
    if missing:
        raise DataFormatError(f"manifest missing keys: {sorted(missing)}")
    if manifest["format_version"] != FORMAT_VERSION:
        raise DataFormatError(
            f"dataset format_version {manifest['format_version']}, "
            f"this build reads {FORMAT_VERSION}"
        )

    n = manifest["n_samples"]
    units, bins = manifest["n_units"], manifest["n_bins"]
    raw = (path / "features.f32le").read_bytes()
    expected = n * units * bins * 4
    if len(raw) != expected:
        raise DataFormatError(
            f"features.f32le is {len(raw)} bytes, expected {expected}"
        )
    features = np.frombuffer(raw, dtype="<f4").reshape(n, units, bins)

    labels = np.frombuffer((path / "labels.u8").read_bytes(), dtype=np.uint8)
    if len(labels) != n:
        raise DataFormatError(f"labels.u8 has {len(labels)} entries, expected {n}")

    true_labels = None
    if manifest["has_true_labels"]:
        tl_path = path / "true_labels.u8"
        if not tl_path.is_file():
            raise DataFormatError("manifest promises true labels but true_labels.u8 is missing")
        true_labels = np.frombuffer(tl_path.read_bytes(), dtype=np.uint8)
        if len(true_labels) != n:
            raise DataFormatError(
                f"true_labels.u8 has {len(true_labels)} entries, expected {n}"
            )

    return LabeledDataset(
        features=features.copy(),
        noisy_labels=labels,
        true_labels=true_labels,
        class_names=list(manifest["class_names"]),
        seed=manifest["seed"],
        noise=manifest["noise"],
        extra=manifest["extra"],
    )
