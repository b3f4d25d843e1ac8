import numpy as np
import pytest

from emonet.config import GenerateSection, ModelSection, NoiseSection
from emonet.pipeline import build_synthetic, factory_from_section


@pytest.fixture
def tiny_noisy_dataset():
    """120 samples, 3 classes, 6x8 features, 20% exact-count symmetric noise."""
    gen = GenerateSection(
        n_classes=3,
        n_per_class=40,
        n_units=6,
        n_bins=8,
        separation=2.0,
        noise=NoiseSection(kind="symmetric", rate=0.2, exact_count=True),
    )
    return build_synthetic(gen, seed=7)


@pytest.fixture
def tiny_clean_dataset():
    gen = GenerateSection(n_classes=3, n_per_class=40, n_units=6, n_bins=8, separation=2.5)
    return build_synthetic(gen, seed=3)


def small_mlp_factory(n_features, n_classes, hidden=(16,), epochs=30, batch_size=32):
    section = ModelSection(hidden_sizes=list(hidden), epochs=epochs, batch_size=batch_size)
    return factory_from_section(section, n_features, n_classes)


class LookupStub:
    """Predicts by memorizing rows of a fixed (X, labels) table.

    Stands in for a perfect classifier: any row it is asked about must have
    appeared in the table it was built from.
    """

    def __init__(self, X, labels, n_classes, seed=0):
        self.table = {X[i].tobytes(): int(labels[i]) for i in range(len(labels))}
        self.n_classes = n_classes

    def fit(self, X, labels, sample_weight=None):
        return self

    def predict(self, X):
        return np.array([self.table[row.tobytes()] for row in X])

    def predict_proba(self, X):
        probs = np.full((len(X), self.n_classes), 0.0)
        probs[np.arange(len(X)), self.predict(X)] = 1.0
        return probs


class ConstantStub:
    """Always predicts one class, with confident probabilities."""

    def __init__(self, n_classes, cls=0, seed=0):
        self.n_classes = n_classes
        self.cls = cls

    def fit(self, X, labels, sample_weight=None):
        return self

    def predict(self, X):
        return np.full(len(X), self.cls)

    def predict_proba(self, X):
        probs = np.full((len(X), self.n_classes), 1e-6)
        probs[:, self.cls] = 1.0 - 1e-6 * (self.n_classes - 1)
        return probs
