"""Label-noise-robust neural decoding of spike-train firing-rate matrices.

Pipeline: spike preprocessing (or synthetic generation) -> out-of-fold
label-quality estimation -> per-sample weight construction (prune or
reweight) -> weighted training of a from-scratch MLP classifier ->
experiment harness (CV, reliable test sets, pruning ablations).
"""

from .cleaning import (
    CleaningResult,
    ConfidentJoint,
    ProbMatrix,
    class_thresholds,
    clean_labels,
    confident_joint,
    flag_errors,
    out_of_fold_probs,
    rank_label_quality,
    stratified_folds,
)
from .dataset import LabeledDataset, load_dataset, save_dataset
from .errors import (
    ConfigError,
    DataFormatError,
    EmonetError,
    EmptyEffectiveDatasetError,
    NumericError,
)
from .harness import (
    AblationPoint,
    AblationResult,
    CvResult,
    ablation_sweep,
    build_reliable_test_set,
    ten_fold_cv,
)
from .metrics import Metrics, compute_metrics
from .mlp import (
    MlpClassifier,
    MlpConfig,
    MlpParams,
    backward,
    forward,
    init_params,
    load_params,
    predict,
    save_params,
    train,
    weighted_cross_entropy,
)
from .spikes import (
    SpikeTrain,
    TrialMatrix,
    WindowSpec,
    add_gaussian_noise,
    assemble_trial,
    bin_firing_rates,
    dropout_augment,
    spikes_to_dataset,
    standardize,
)
from .synthetic import (
    ClassPrototype,
    NoiseModel,
    generate,
    generate_clean_control,
    inject_noise,
    make_prototypes,
)
from .weighting import (
    WeightVector,
    standardize_quality,
    weight_prune,
    weight_reweight,
    weights_for_mode,
)

__version__ = "0.1.0"
