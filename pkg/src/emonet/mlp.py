"""From-scratch feedforward classifier with weighted cross-entropy training.

Float64 throughout; gradients are exact analytic backprop (checked against
finite differences in the test suite).  Training is fully deterministic
given a seed: initialization and epoch shuffles come from named seed
streams, and per-sample loss weights multiply the per-sample gradient
before the batch mean, so a weight vector of ones is bit-identical to an
unweighted run.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from ._fast import gather_rows
from .errors import ConfigError, DataFormatError, EmptyEffectiveDatasetError, NumericError
from .rng import stream

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12

CHECKPOINT_MAGIC = b"EMNCKPT1"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    layer_sizes: tuple[int, ...]
    learning_rate: float = 0.001
    batch_size: int = 256
    epochs: int = 200
    optimizer: str = "adam"  # "adam" | "momentum"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    mean_mode: str = "nominal"  # "nominal" | "effective"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ConfigError("layer_sizes needs at least input and output")
        if any(s < 1 for s in self.layer_sizes):
            raise ConfigError(f"layer sizes must be positive: {self.layer_sizes}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.optimizer not in ("adam", "momentum"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.mean_mode not in ("nominal", "effective"):
            raise ConfigError(f"unknown mean_mode {self.mean_mode!r}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    opt_m: list[np.ndarray] = field(default_factory=list)
    opt_v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def arrays(self) -> list[np.ndarray]:
        """Weights and biases in the fixed update order W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])


def init_params(config: MlpConfig) -> MlpParams:
    """Fan-in-scaled uniform weights, zero biases, zeroed optimizer state."""
    weights, biases = [], []
    for layer, (fan_in, fan_out) in enumerate(zip(config.layer_sizes, config.layer_sizes[1:])):
        rng = stream(config.seed, "init", layer)
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    params = MlpParams(weights=weights, biases=biases)
    params.opt_m = [np.zeros_like(a) for a in params.arrays()]
    params.opt_v = [np.zeros_like(a) for a in params.arrays()]
    return params


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_full(params: MlpParams, X: np.ndarray):
    """Returns (per-layer activations incl. input, pre-activations, probs)."""
    acts = [X]
    pre = []
    a = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pre.append(z)
        a = _softmax(z) if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts, pre, acts[-1]


def forward(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Class probabilities, one row per sample (rows sum to 1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.weights[0].shape[0]:
        raise DataFormatError(
            f"expected (n, {params.weights[0].shape[0]}) inputs, got {X.shape}"
        )
    return _forward_full(params, X)[2]


def weighted_cross_entropy(
    probs: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray | None = None,
    mean_mode: str = "nominal",
) -> float:
    """Mean over samples of weight * negative log predicted true-class prob.

    ``nominal`` divides by the sample count; ``effective`` divides by the
    weight sum, so pruned samples do not dilute the mean.
    """
    n = len(labels)
    if weights is None:
        weights = np.ones(n)
    p_true = probs[np.arange(n), labels]
    n_floored = int(np.sum(p_true < PROB_FLOOR))
    if n_floored:
        log.warning("clamped %d zero probabilities to %g in loss", n_floored, PROB_FLOOR)
    nll = -np.log(np.maximum(p_true, PROB_FLOOR))
    denom = n if mean_mode == "nominal" else weights.sum()
    if denom == 0:
        return 0.0
    return float((weights * nll).sum() / denom)


def _grads_from_forward(params, acts, pre, probs, labels, weights, denom):
    n = len(labels)
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta *= (weights / denom)[:, None]
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * (pre[layer - 1] > 0.0)
    return grads_w, grads_b


def backward(
    params: MlpParams,
    X: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray | None = None,
    mean_mode: str = "nominal",
):
    """Analytic gradients of weighted_cross_entropy w.r.t. every parameter.

    Returns (weight grads, bias grads) lists matching params.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if weights is None:
        weights = np.ones(n)
    acts, pre, probs = _forward_full(params, X)
    denom = n if mean_mode == "nominal" else weights.sum()
    if denom == 0:
        zero = [np.zeros_like(w) for w in params.weights]
        return zero, [np.zeros_like(b) for b in params.biases]
    return _grads_from_forward(params, acts, pre, probs, labels, weights, denom)


def _apply_update(params: MlpParams, grads, config: MlpConfig, scratch=None):
    flat_grads = []
    for gw, gb in zip(*grads):
        flat_grads.extend((gw, gb))
    params.step += 1
    t = params.step
    lr = config.learning_rate
    if config.optimizer == "adam":
        bias1 = 1 - config.beta1**t
        bias2 = 1 - config.beta2**t
        for i, (p, g, m, v) in enumerate(
            zip(params.arrays(), flat_grads, params.opt_m, params.opt_v)
        ):
            buf = None if scratch is None else scratch[i]
            m *= config.beta1
            m += (1 - config.beta1) * g
            v *= config.beta2
            np.multiply(g, g, out=g)  # grads are never reused after the update
            g *= 1 - config.beta2
            v += g
            # step = lr/bias1 * m / (sqrt(v/bias2) + eps), built in scratch
            buf = np.divide(v, bias2, out=buf)
            np.sqrt(buf, out=buf)
            buf += config.eps
            np.divide(m, buf, out=buf)
            buf *= lr / bias1
            p -= buf
    else:  # momentum SGD
        for p, g, m in zip(params.arrays(), flat_grads, params.opt_m):
            m *= config.momentum
            m -= lr * g
            p += m


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_acc: float


def train(
    config: MlpConfig,
    X: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray | None = None,
) -> tuple[MlpParams, list[EpochRecord]]:
    """Shuffled minibatch training with per-sample loss weights.

    Accepts float32 or float64 features; arithmetic is float64 either way
    (minibatches are widened into a reusable buffer, which also keeps the
    hot path free of large allocations).  Loss and accuracy in the log come
    from the pre-update forward pass of each minibatch, so logging never
    adds extra full-dataset passes.
    """
    if not isinstance(X, np.ndarray) or X.dtype not in (np.float32, np.float64):
        X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    n = X.shape[0]
    if X.ndim != 2 or X.shape[1] != config.n_inputs:
        raise DataFormatError(f"expected (n, {config.n_inputs}) features, got {X.shape}")
    if labels.shape != (n,):
        raise DataFormatError(f"{labels.shape} labels for {n} samples")
    if labels.size and (labels.min() < 0 or labels.max() >= config.n_classes):
        raise DataFormatError(f"labels outside 0..{config.n_classes - 1}")
    if weights is None:
        weights = np.ones(n)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n,):
        raise DataFormatError(f"{weights.shape} weights for {n} samples")
    if not np.any(weights > 0):
        raise EmptyEffectiveDatasetError(
            "empty effective dataset: all sample weights are zero"
        )

    params = init_params(config)
    scratch = [np.empty_like(a) for a in params.arrays()]
    shuffle_rng = stream(config.seed, "shuffle")

    bs = min(config.batch_size, n)
    batch_buf = np.empty((bs, X.shape[1]), dtype=np.float64)
    rows = np.arange(bs)

    records = []
    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            k = len(idx)
            xb = batch_buf[:k]
            gather_rows(X, idx, xb)
            yb, wb = labels[idx], weights[idx]
            acts, pre, probs = _forward_full(params, xb)

            denom = k if config.mean_mode == "nominal" else wb.sum()
            p_true = probs[rows[:k], yb]
            nll = -np.log(np.maximum(p_true, PROB_FLOOR))
            batch_loss = (wb * nll).sum() / denom if denom > 0 else 0.0
            loss_sum += batch_loss * k
            correct += int(np.sum(probs.argmax(axis=1) == yb))

            if denom > 0:
                grads = _grads_from_forward(params, acts, pre, probs, yb, wb, denom)
                _apply_update(params, grads, config, scratch)

        epoch_loss = loss_sum / n
        if not np.isfinite(epoch_loss):
            raise NumericError(
                f"non-finite loss {epoch_loss} at epoch {epoch} "
                f"(lr={config.learning_rate}, optimizer={config.optimizer})"
            )
        records.append(EpochRecord(epoch=epoch, loss=float(epoch_loss), train_acc=correct / n))
    return params, records


def predict(params: MlpParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(argmax labels, probabilities); ties resolve to the lowest class index."""
    probs = forward(params, X)
    return probs.argmax(axis=1), probs


class MlpClassifier:
    """fit/predict_proba wrapper used by cross-validation and the harness."""

    def __init__(self, config: MlpConfig):
        self.config = config
        self.params: MlpParams | None = None
        self.log: list[EpochRecord] = []

    def reseeded(self, seed: int) -> "MlpClassifier":
        return MlpClassifier(replace(self.config, seed=seed))

    def fit(self, X, labels, sample_weight=None) -> "MlpClassifier":
        self.params, self.log = train(self.config, X, labels, sample_weight)
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self.params is None:
            raise NumericError("classifier not fitted")
        return forward(self.params, X)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


def save_params(params: MlpParams, path) -> None:
    """Versioned binary checkpoint: magic, version, layer sizes, f64le blobs."""
    sizes = params.layer_sizes
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_params(path) -> MlpParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataFormatError(f"{path}: not a checkpoint (bad magic)")
        version, n_sizes = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise DataFormatError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
        sizes = struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes))
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
            if w.size != fan_in * fan_out:
                raise DataFormatError(f"{path}: truncated checkpoint")
            weights.append(w.reshape(fan_in, fan_out).copy())
            b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
            if b.size != fan_out:
                raise DataFormatError(f"{path}: truncated checkpoint")
            biases.append(b.copy())
        if fh.read(1):
            raise DataFormatError(f"{path}: trailing bytes after parameters")
    params = MlpParams(weights=weights, biases=biases)
    params.opt_m = [np.zeros_like(a) for a in params.arrays()]
    params.opt_v = [np.zeros_like(a) for a in params.arrays()]
    return params


def write_training_log(records: list[EpochRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "train_acc"])
        for r in records:
            writer.writerow([r.epoch, repr(r.loss), repr(r.train_acc)])
