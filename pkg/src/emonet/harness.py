"""Experiment protocols: stratified CV, reliable test sets, pruning ablations.

Every run is replayable from (config, seed): fold splits, cleanup, random
removals, and classifier training all draw from streams keyed by
(experiment, fold-or-ratio, seed index).  Results serialize to a JSON
document plus a flat CSV for plotting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cleaning import CleaningResult, clean_labels, stratified_folds
from .errors import ConfigError, DataFormatError
from .metrics import Metrics, compute_metrics
from .rng import child_seed, stream
from .weighting import weights_for_mode

RESULTS_FORMAT_VERSION = 1
MAX_PRUNE_RATIO = 0.6


def _sd(values) -> float:
    """Population SD; stays defined for single-seed runs."""
    return float(np.std(np.asarray(values, dtype=np.float64)))


@dataclass
class CvResult:
    mode: str
    per_fold: list[Metrics]
    fold_assignment: np.ndarray
    mean_accuracy: float = field(init=False)
    sd_accuracy: float = field(init=False)
    mean_macro_f1: float = field(init=False)
    sd_macro_f1: float = field(init=False)

    def __post_init__(self):
        accs = [m.accuracy for m in self.per_fold]
        f1s = [m.macro_f1 for m in self.per_fold]
        self.mean_accuracy = float(np.mean(accs))
        self.sd_accuracy = _sd(accs)
        self.mean_macro_f1 = float(np.mean(f1s))
        self.sd_macro_f1 = _sd(f1s)


def _fit_weighted(
    X, labels, n_classes, classifier_factory, aux_factory, mode, cl_opts, seed
):
    """Clean (if the mode needs it), weight, and fit one classifier."""
    cleaning = None
    if mode != "baseline":
        if aux_factory is None:
            raise ConfigError(f"mode {mode!r} needs an auxiliary model factory")
        cleaning = clean_labels(
            X,
            labels,
            n_classes,
            aux_factory,
            k_folds=cl_opts.get("k_folds", 5),
            seed=child_seed(seed, "clean"),
            score=cl_opts.get("score", "margin"),
            method=cl_opts.get("method", "by_noise_rate"),
            rank_fraction=cl_opts.get("rank_fraction", 0.1),
        )
    wv = weights_for_mode(
        mode,
        len(labels),
        quality=None if cleaning is None else cleaning.quality,
        flags=None if cleaning is None else cleaning.flags,
        renormalize_mean=cl_opts.get("renormalize_mean", False),
    )
    clf = classifier_factory(seed=child_seed(seed, "train"))
    clf.fit(X, labels, sample_weight=wv.values)
    return clf, wv, cleaning


def ten_fold_cv(
    X: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    classifier_factory,
    mode: str = "baseline",
    aux_factory=None,
    cl_opts: dict | None = None,
    seed: int = 0,
    n_folds: int = 10,
) -> CvResult:
    """Stratified k-fold protocol.

    Label cleanup runs inside each training split only, so no cleanup
    statistic ever sees the fold it is evaluated on.
    """
    labels = np.asarray(labels)
    cl_opts = cl_opts or {}
    assignment = stratified_folds(labels, n_folds, stream(seed, "cv", "folds"))
    per_fold = []
    for fold in range(n_folds):
        held_out = assignment == fold
        clf, _, _ = _fit_weighted(
            X[~held_out],
            labels[~held_out],
            n_classes,
            classifier_factory,
            aux_factory,
            mode,
            cl_opts,
            seed=child_seed(seed, "cv", fold),
        )
        preds = clf.predict(X[held_out])
        per_fold.append(compute_metrics(preds, labels[held_out], n_classes))
    return CvResult(mode=mode, per_fold=per_fold, fold_assignment=assignment)


def build_reliable_test_set(
    labels: np.ndarray,
    cleaning: CleaningResult,
    fraction: float = 0.15,
    seed: int = 0,
    per_class: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Balanced test set drawn from samples the cleanup trusts.

    Candidates are unflagged samples whose held-out prediction agrees with
    their given label.  Returns (test indices, remaining train indices),
    disjoint and covering everything.
    """
    labels = np.asarray(labels)
    n = len(labels)
    classes = np.unique(labels)
    if per_class is None:
        if not 0.0 < fraction < 1.0:
            raise ConfigError(f"test fraction must be in (0, 1), got {fraction}")
        per_class = int(np.rint(fraction * n / len(classes)))
    if per_class < 1:
        raise ConfigError("reliable test set would be empty")

    agree = cleaning.probs.probs.argmax(axis=1) == labels
    candidates = ~cleaning.flags & agree
    rng = stream(seed, "testset")
    chosen = []
    for c in classes:
        pool = np.flatnonzero(candidates & (labels == c))
        if len(pool) < per_class:
            raise DataFormatError(
                f"class {c}: only {len(pool)} reliable candidates, need {per_class}"
            )
        chosen.append(rng.choice(pool, size=per_class, replace=False))
    test_idx = np.sort(np.concatenate(chosen))
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    return test_idx, np.flatnonzero(mask)


@dataclass
class AblationPoint:
    ratio: float
    acc_cl: list[float]
    acc_random: list[float]

    @property
    def mean_cl(self) -> float:
        return float(np.mean(self.acc_cl))

    @property
    def sd_cl(self) -> float:
        return _sd(self.acc_cl)

    @property
    def mean_random(self) -> float:
        return float(np.mean(self.acc_random))

    @property
    def sd_random(self) -> float:
        return _sd(self.acc_random)


@dataclass
class AblationResult:
    points: list[AblationPoint]
    test_idx: np.ndarray
    train_idx: np.ndarray
    cleaning: CleaningResult
    n_seeds: int


def ablation_sweep(
    X: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    classifier_factory,
    aux_factory,
    ratios,
    n_seeds: int = 5,
    cl_opts: dict | None = None,
    test_fraction: float = 0.15,
    seed: int = 0,
) -> AblationResult:
    """Quality-ranked pruning vs size-matched random removal.

    One cleanup pass fixes quality scores and the reliable test set; each
    (ratio, seed) trains two classifiers that share initialization and
    batch order and differ only in which training rows were removed.
    Identical removal sets (notably ratio 0) reuse the same run.
    """
    labels = np.asarray(labels)
    cl_opts = cl_opts or {}
    ratios = [float(r) for r in ratios]
    for r in ratios:
        if not 0.0 <= r <= MAX_PRUNE_RATIO:
            raise ConfigError(f"pruning ratio {r} outside [0, {MAX_PRUNE_RATIO}]")
    if n_seeds < 1:
        raise ConfigError("need at least one seed")

    cleaning = clean_labels(
        X,
        labels,
        n_classes,
        aux_factory,
        k_folds=cl_opts.get("k_folds", 5),
        seed=child_seed(seed, "ablate", "clean"),
        score=cl_opts.get("score", "margin"),
        method=cl_opts.get("method", "by_noise_rate"),
        rank_fraction=cl_opts.get("rank_fraction", 0.1),
    )
    test_idx, train_idx = build_reliable_test_set(
        labels, cleaning, fraction=test_fraction, seed=child_seed(seed, "ablate", "testset")
    )
    X_test, y_test = X[test_idx], labels[test_idx]
    n_train = len(train_idx)
    # train-pool rows from worst label quality to best
    by_quality = train_idx[np.argsort(cleaning.quality[train_idx], kind="stable")]

    cache: dict = {}

    def run(keep_idx: np.ndarray, train_seed: int) -> float:
        key = (train_seed, keep_idx.tobytes())
        if key not in cache:
            counts = np.bincount(labels[keep_idx], minlength=n_classes)
            if np.any(counts == 0):
                empty = int(np.argmin(counts))
                raise DataFormatError(
                    f"pruning removed every training sample of class {empty}"
                )
            clf = classifier_factory(seed=train_seed)
            clf.fit(X[keep_idx], labels[keep_idx])
            acc = float(np.mean(clf.predict(X_test) == y_test))
            cache[key] = acc
        return cache[key]

    points = []
    for ratio_index, ratio in enumerate(ratios):
        k = int(np.rint(ratio * n_train))
        cl_keep = np.sort(by_quality[k:])
        acc_cl, acc_random = [], []
        for s in range(n_seeds):
            train_seed = child_seed(seed, "ablate", "train", ratio_index, s)
            rand_rng = stream(seed, "ablate", "random", ratio_index, s)
            removed = rand_rng.choice(train_idx, size=k, replace=False)
            rand_keep = np.sort(np.setdiff1d(train_idx, removed, assume_unique=True))
            acc_cl.append(run(cl_keep, train_seed))
            acc_random.append(run(rand_keep, train_seed))
        points.append(AblationPoint(ratio=ratio, acc_cl=acc_cl, acc_random=acc_random))
    return AblationResult(
        points=points,
        test_idx=test_idx,
        train_idx=train_idx,
        cleaning=cleaning,
        n_seeds=n_seeds,
    )


def results_envelope(experiment: str, experiment_id: str, seed: int, config_echo: dict) -> dict:
    return {
        "format_version": RESULTS_FORMAT_VERSION,
        "experiment": experiment,
        "experiment_id": experiment_id,
        "seed": seed,
        "config": config_echo,
    }


def ablation_to_json(
    result: AblationResult, experiment_id: str, seed: int, config_echo: dict
) -> dict:
    doc = results_envelope("ablation", experiment_id, seed, config_echo)
    doc.update(
        {
            "n_seeds": result.n_seeds,
            "n_test": int(len(result.test_idx)),
            "n_train_pool": int(len(result.train_idx)),
            "n_flagged": int(result.cleaning.flags.sum()),
            "points": [
                {
                    "ratio": p.ratio,
                    "mean_cl": p.mean_cl,
                    "sd_cl": p.sd_cl,
                    "mean_random": p.mean_random,
                    "sd_random": p.sd_random,
                    "per_seed_cl": p.acc_cl,
                    "per_seed_random": p.acc_random,
                }
                for p in result.points
            ],
        }
    )
    return doc


def cv_to_json(result: CvResult, experiment_id: str, seed: int, config_echo: dict) -> dict:
    doc = results_envelope("cv", experiment_id, seed, config_echo)
    doc.update(
        {
            "mode": result.mode,
            "n_folds": len(result.per_fold),
            "mean_accuracy": result.mean_accuracy,
            "sd_accuracy": result.sd_accuracy,
            "mean_macro_f1": result.mean_macro_f1,
            "sd_macro_f1": result.sd_macro_f1,
            "per_fold": [m.to_dict() for m in result.per_fold],
        }
    )
    return doc


def write_results_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def write_ablation_csv(points: list[AblationPoint], path) -> None:
    """Flat plot table: ratio, mean_cl, sd_cl, mean_rand, sd_rand."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ratio", "mean_cl", "sd_cl", "mean_rand", "sd_rand"])
        for p in points:
            writer.writerow(
                [repr(p.ratio)]
                + [repr(v) for v in (p.mean_cl, p.sd_cl, p.mean_random, p.sd_random)]
            )
