"""Per-sample training weights from label-quality scores.

Two strategies: reweighting squashes standardized quality through a
sigmoid, so dubious labels still train with shrunken influence; pruning
zeroes flagged samples outright.  Baseline weights are all ones and train
bit-identically to an unweighted run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError

MODES = ("baseline", "emo_p", "emo_r")

# sigmoid saturates to exactly 0/1 in float64 past |x| ~ 37; clamp inside
_WEIGHT_EPS = 1e-15


@dataclass(frozen=True)
class WeightVector:
    """Per-sample loss weights plus the strategy that produced them."""

    values: np.ndarray
    mode: str  # "reweight" | "prune" | "baseline"
    renormalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if self.mode == "baseline":
            if not np.all(v == 1.0):
                raise DataFormatError("baseline weights must all be 1")
        elif self.mode == "prune":
            if not np.all((v == 0.0) | (v == 1.0)):
                raise DataFormatError("prune weights must be 0 or 1")
        elif self.mode == "reweight":
            if not self.renormalized and not np.all((v > 0.0) & (v < 1.0)):
                raise DataFormatError("reweight weights must lie strictly in (0, 1)")
            if self.renormalized and not np.all(v > 0.0):
                raise DataFormatError("renormalized weights must be positive")
        else:
            raise ConfigError(f"unknown weight mode {self.mode!r}")

    @property
    def n_pruned(self) -> int:
        return int(np.sum(self.values == 0.0))


def standardize_quality(q: np.ndarray) -> np.ndarray:
    """Z-score with population std; a constant vector maps to all zeros."""
    q = np.asarray(q, dtype=np.float64)
    if q.size == 0:
        raise DataFormatError("empty quality vector")
    if q.size < 2:
        raise DataFormatError("need at least 2 quality scores to standardize")
    mu = q.mean()
    sigma = q.std()
    if sigma <= 1e-12 * max(1.0, abs(mu)):
        return np.zeros_like(q)
    return (q - mu) / sigma


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return np.clip(out, _WEIGHT_EPS, 1.0 - _WEIGHT_EPS)


def weight_reweight(q_star: np.ndarray, renormalize_mean: bool = False) -> WeightVector:
    """Sigmoid of standardized quality; optionally rescaled to mean 1."""
    w = _sigmoid(np.asarray(q_star, dtype=np.float64))
    if renormalize_mean:
        w = w / w.mean()
    return WeightVector(values=w, mode="reweight", renormalized=renormalize_mean)


def weight_prune(flags: np.ndarray) -> WeightVector:
    """Zero weight for flagged samples, one for the rest."""
    flags = np.asarray(flags, dtype=bool)
    return WeightVector(values=1.0 - flags.astype(np.float64), mode="prune")


def weights_for_mode(
    mode: str,
    n_samples: int,
    quality: np.ndarray | None = None,
    flags: np.ndarray | None = None,
    renormalize_mean: bool = False,
) -> WeightVector:
    """Build the weight vector a training mode needs from cleanup outputs."""
    if mode == "baseline":
        return WeightVector(values=np.ones(n_samples), mode="baseline")
    if mode == "emo_p":
        if flags is None:
            raise ConfigError("emo_p needs error flags")
        return weight_prune(flags)
    if mode == "emo_r":
        if quality is None:
            raise ConfigError("emo_r needs quality scores")
        return weight_reweight(standardize_quality(quality), renormalize_mean)
    raise ConfigError(f"unknown mode {mode!r}, want one of {MODES}")


def write_weights_csv(wv: WeightVector, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "weight", "mode"])
        for i, w in enumerate(wv.values):
            writer.writerow([i, repr(float(w)), wv.mode])
