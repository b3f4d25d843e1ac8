"""Label-quality estimation from out-of-fold predicted probabilities.

The auxiliary model never scores a sample it trained on: stratified k-fold
rotation gives every sample one held-out probability row.  From those rows
we compute per-class confidence thresholds (mean self-confidence), count
the confident joint of (given label, estimated true label) pairs, rank
per-sample label quality, and flag suspected label errors.

The flagging budget comes from the calibrated joint: cell (i, j) of the
joint says what fraction of the dataset looks like "labeled i, actually
j", and that many of the lowest-quality matching samples get flagged.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError
from .rng import child_seed, stream

QUALITY_SCORES = ("margin", "self_confidence")
FLAG_METHODS = ("by_noise_rate", "by_rank_fraction")


@dataclass
class ProbMatrix:
    """Out-of-fold class probabilities plus the fold that held each sample out."""

    probs: np.ndarray
    fold_assignment: np.ndarray

    def __post_init__(self):
        if np.any(np.abs(self.probs.sum(axis=1) - 1.0) > 1e-6):
            raise DataFormatError("probability rows must sum to 1 within 1e-6")


@dataclass
class ConfidentJoint:
    counts: np.ndarray  # (m, m) ints: [given, estimated]
    calibrated: np.ndarray  # (m, m) floats summing to 1
    n_excluded: int  # samples confident in no class


@dataclass
class CleaningResult:
    """Everything the weighting and harness layers consume."""

    probs: ProbMatrix
    thresholds: np.ndarray
    joint: ConfidentJoint
    quality: np.ndarray
    flags: np.ndarray


def stratified_folds(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per sample; each class spread as evenly as possible over folds."""
    if k < 2:
        raise ConfigError(f"need k >= 2 folds, got {k}")
    labels = np.asarray(labels)
    assignment = np.full(len(labels), -1, dtype=np.int64)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < k:
            raise DataFormatError(
                f"class {c} has {len(idx)} samples, fewer than {k} folds"
            )
        idx = rng.permutation(idx)
        for fold, chunk in enumerate(np.array_split(idx, k)):
            assignment[chunk] = fold
    return assignment


def out_of_fold_probs(
    X: np.ndarray,
    labels: np.ndarray,
    classifier_factory,
    k_folds: int = 5,
    seed: int = 0,
) -> ProbMatrix:
    """Held-out probabilities from k-fold rotation of the auxiliary model.

    ``classifier_factory(seed)`` must return an object with
    ``fit(X, labels)`` and ``predict_proba(X)``.
    """
    labels = np.asarray(labels)
    assignment = stratified_folds(labels, k_folds, stream(seed, "folds"))
    n = len(labels)
    out = None
    for fold in range(k_folds):
        held_out = assignment == fold
        model = classifier_factory(seed=child_seed(seed, "aux", fold))
        model.fit(X[~held_out], labels[~held_out])
        fold_probs = model.predict_proba(X[held_out])
        if out is None:
            out = np.full((n, fold_probs.shape[1]), np.nan)
        out[held_out] = fold_probs
    return ProbMatrix(probs=out, fold_assignment=assignment)


def class_thresholds(probs: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-class mean self-confidence: t[j] = mean of p(j) over samples labeled j."""
    labels = np.asarray(labels)
    t = np.empty(n_classes)
    for c in range(n_classes):
        mask = labels == c
        if not mask.any():
            raise DataFormatError(f"class {c} has no samples; cannot set its threshold")
        t[c] = probs[mask, c].mean()
    return t


def confident_joint(
    probs: np.ndarray, labels: np.ndarray, thresholds: np.ndarray
) -> ConfidentJoint:
    """Count confident (given, estimated) label pairs and calibrate them.

    A sample's candidate classes are those whose probability clears that
    class's threshold; the best candidate (argmax probability, ties to the
    lowest index) is its estimated true label.  Samples with no candidate
    are excluded.  Calibration rescales each given-label row to that
    class's sample count, then normalizes the whole matrix to sum to 1.
    """
    labels = np.asarray(labels)
    n, m = probs.shape
    above = probs >= thresholds[None, :]
    has_candidate = above.any(axis=1)
    masked = np.where(above, probs, -np.inf)
    est = np.argmax(masked, axis=1)

    counts = np.zeros((m, m), dtype=np.int64)
    np.add.at(counts, (labels[has_candidate], est[has_candidate]), 1)

    class_counts = np.bincount(labels, minlength=m).astype(np.float64)
    row_sums = counts.sum(axis=1).astype(np.float64)
    scale = np.divide(class_counts, row_sums, out=np.zeros(m), where=row_sums > 0)
    calibrated = counts * scale[:, None]
    total = calibrated.sum()
    if total > 0:
        calibrated /= total
    return ConfidentJoint(
        counts=counts, calibrated=calibrated, n_excluded=int(n - counts.sum())
    )


def rank_label_quality(
    probs: np.ndarray, labels: np.ndarray, score: str = "margin"
) -> np.ndarray:
    """Per-sample label quality, higher = more trustworthy.

    ``margin``: self-confidence minus the best competing class probability,
    in [-1, 1].  ``self_confidence``: the given label's probability alone.
    """
    if score not in QUALITY_SCORES:
        raise ConfigError(f"unknown quality score {score!r}, want one of {QUALITY_SCORES}")
    labels = np.asarray(labels)
    n = len(labels)
    self_conf = probs[np.arange(n), labels]
    if score == "self_confidence":
        return self_conf.copy()
    others = probs.copy()
    others[np.arange(n), labels] = -np.inf
    return self_conf - others.max(axis=1)


def flag_errors(
    joint: ConfidentJoint,
    quality: np.ndarray,
    labels: np.ndarray,
    probs: np.ndarray,
    method: str = "by_noise_rate",
    rank_fraction: float = 0.1,
) -> np.ndarray:
    """Boolean mask of suspected label errors.

    ``by_noise_rate``: the calibrated joint sets a per-cell budget
    round(n * Q[i][j]) for each off-diagonal (given i, estimated j); the
    lowest-quality samples with given label i and predicted class j fill
    it.  ``by_rank_fraction``: bottom rank_fraction of all samples by
    quality.  Quality ties break toward the earlier sample.
    """
    if method not in FLAG_METHODS:
        raise ConfigError(f"unknown flag method {method!r}, want one of {FLAG_METHODS}")
    labels = np.asarray(labels)
    n = len(labels)
    flags = np.zeros(n, dtype=bool)

    if method == "by_rank_fraction":
        if not 0.0 <= rank_fraction <= 1.0:
            raise ConfigError(f"rank_fraction must be in [0, 1], got {rank_fraction}")
        n_flag = int(np.rint(rank_fraction * n))
        order = np.argsort(quality, kind="stable")
        flags[order[:n_flag]] = True
        return flags

    m = joint.calibrated.shape[0]
    predicted = probs.argmax(axis=1)
    for given in range(m):
        for est in range(m):
            if given == est:
                continue
            budget = int(np.rint(n * joint.calibrated[given, est]))
            if budget == 0:
                continue
            cell = np.flatnonzero((labels == given) & (predicted == est))
            if cell.size == 0:
                continue
            worst = cell[np.argsort(quality[cell], kind="stable")]
            flags[worst[:budget]] = True
    return flags


def clean_labels(
    X: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    classifier_factory,
    k_folds: int = 5,
    seed: int = 0,
    score: str = "margin",
    method: str = "by_noise_rate",
    rank_fraction: float = 0.1,
) -> CleaningResult:
    """Full cleanup pass: out-of-fold probs -> thresholds -> joint -> quality -> flags."""
    pm = out_of_fold_probs(X, labels, classifier_factory, k_folds=k_folds, seed=seed)
    t = class_thresholds(pm.probs, labels, n_classes)
    joint = confident_joint(pm.probs, labels, t)
    quality = rank_label_quality(pm.probs, labels, score=score)
    flags = flag_errors(joint, quality, labels, pm.probs, method=method, rank_fraction=rank_fraction)
    return CleaningResult(probs=pm, thresholds=t, joint=joint, quality=quality, flags=flags)


def write_cleaning_csv(result: CleaningResult, path) -> None:
    """Per-sample audit rows: fold, class probabilities, quality, flag."""
    m = result.probs.probs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "fold"] + [f"prob_{c}" for c in range(m)] + ["quality", "flag"]
        )
        for i in range(len(result.quality)):
            writer.writerow(
                [i, result.probs.fold_assignment[i]]
                + [repr(float(p)) for p in result.probs.probs[i]]
                + [repr(float(result.quality[i])), int(result.flags[i])]
            )


def write_joint_report(result: CleaningResult, path) -> None:
    report = {
        "thresholds": result.thresholds.tolist(),
        "counts": result.joint.counts.tolist(),
        "calibrated": result.joint.calibrated.tolist(),
        "n_excluded": result.joint.n_excluded,
        "n_flagged": int(result.flags.sum()),
    }
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
