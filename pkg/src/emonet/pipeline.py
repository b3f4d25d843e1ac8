"""Glue between parsed configs and the library: dataset synthesis, model
factories, and the clean -> weight -> train path shared by the CLI and the
experiment harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cleaning import CleaningResult, clean_labels
from .config import CleaningSection, GenerateSection, ModelSection, WeightingSection
from .dataset import LabeledDataset
from .mlp import EpochRecord, MlpClassifier, MlpConfig, MlpParams, train
from .rng import child_seed
from .spikes import dropout_augment
from .synthetic import (
    NoiseModel,
    generate,
    generate_clean_control,
    inject_noise,
    make_prototypes,
)
from .weighting import WeightVector, weights_for_mode


def mlp_config_from_section(
    section: ModelSection, n_features: int, n_classes: int, seed: int
) -> MlpConfig:
    return MlpConfig(
        layer_sizes=(n_features, *[int(h) for h in section.hidden_sizes], n_classes),
        learning_rate=section.learning_rate,
        batch_size=section.batch_size,
        epochs=section.epochs,
        optimizer=section.optimizer,
        momentum=section.momentum,
        mean_mode=section.mean_mode,
        seed=seed,
    )


def factory_from_section(section: ModelSection, n_features: int, n_classes: int):
    """Seed -> fitted-later classifier, for fold rotation and ablation arms."""

    def factory(seed: int) -> MlpClassifier:
        return MlpClassifier(mlp_config_from_section(section, n_features, n_classes, seed))

    return factory


def build_synthetic(gen: GenerateSection, seed: int) -> LabeledDataset:
    """Synthesize a dataset per the generate section: prototypes, optional
    label noise, optional dropout augmentation."""
    if gen.clean_control:
        ds = generate_clean_control(
            n_classes=gen.n_classes,
            n_per_class=gen.n_per_class,
            seed=seed,
            separation=gen.separation,
            jitter_std=gen.jitter_std,
            active_units=gen.active_units,
            envelope_width=gen.envelope_width,
            baseline_rate=gen.baseline_rate,
            n_units=gen.n_units,
            n_bins=gen.n_bins,
            class_names=gen.class_names,
        )
    else:
        protos = make_prototypes(
            gen.n_classes,
            separation=gen.separation,
            jitter_std=gen.jitter_std,
            active_units=gen.active_units,
            envelope_width=gen.envelope_width,
            baseline_rate=gen.baseline_rate,
            n_units=gen.n_units,
            n_bins=gen.n_bins,
            seed=seed,
        )
        ds = generate(protos, gen.n_per_class, seed=seed, class_names=gen.class_names)

    if gen.noise.kind == "symmetric":
        model = NoiseModel.symmetric(gen.n_classes, gen.noise.rate)
        ds = inject_noise(ds, model, child_seed(seed, "noise"), exact_count=gen.noise.exact_count)
    elif gen.noise.kind == "matrix":
        model = NoiseModel(np.asarray(gen.noise.transition, dtype=np.float64))
        ds = inject_noise(ds, model, child_seed(seed, "noise"), exact_count=gen.noise.exact_count)

    if gen.augment.copies > 0:
        ds = dropout_augment(
            ds, rate=gen.augment.rate, copies=gen.augment.copies, seed=child_seed(seed, "augment")
        )
    return ds


def run_cleaning(
    ds: LabeledDataset, cleaning_cfg: CleaningSection, seed: int
) -> CleaningResult:
    X = ds.flat_features(np.float32)
    aux_factory = factory_from_section(cleaning_cfg.aux, X.shape[1], ds.n_classes)
    return clean_labels(
        X,
        ds.noisy_labels,
        ds.n_classes,
        aux_factory,
        k_folds=cleaning_cfg.k_folds,
        seed=child_seed(seed, "clean"),
        score=cleaning_cfg.score,
        method=cleaning_cfg.method,
        rank_fraction=cleaning_cfg.rank_fraction,
    )


@dataclass
class TrainArtifacts:
    params: MlpParams
    log: list[EpochRecord]
    weights: WeightVector
    cleaning: CleaningResult | None
    config: MlpConfig


def train_with_mode(
    ds: LabeledDataset,
    mode: str,
    model_cfg: ModelSection,
    cleaning_cfg: CleaningSection,
    weighting_cfg: WeightingSection,
    seed: int,
) -> TrainArtifacts:
    """The full single-dataset path: cleanup (if the mode uses it), weight
    construction, then weighted training of the main classifier."""
    X = ds.flat_features(np.float32)
    cleaning = None if mode == "baseline" else run_cleaning(ds, cleaning_cfg, seed)
    wv = weights_for_mode(
        mode,
        ds.n_samples,
        quality=None if cleaning is None else cleaning.quality,
        flags=None if cleaning is None else cleaning.flags,
        renormalize_mean=weighting_cfg.renormalize_mean,
    )
    config = mlp_config_from_section(
        model_cfg, X.shape[1], ds.n_classes, seed=child_seed(seed, "train")
    )
    params, log = train(config, X, ds.noisy_labels, wv.values)
    return TrainArtifacts(params=params, log=log, weights=wv, cleaning=cleaning, config=config)
