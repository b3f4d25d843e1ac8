import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emonet.errors import ConfigError, DataFormatError, EmptyEffectiveDatasetError
from emonet.mlp import MlpConfig, train
from emonet.rng import stream
from emonet.weighting import (
    WeightVector,
    standardize_quality,
    weight_prune,
    weight_reweight,
    weights_for_mode,
    write_weights_csv,
)


class TestStandardizeQuality:
    def test_hand_example(self):
        q_star = standardize_quality(np.array([1.0, 2.0, 3.0]))
        assert np.allclose(q_star, [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_constant_maps_to_zero(self):
        assert np.all(standardize_quality(np.full(5, 0.3)) == 0.0)

    def test_zero_mean_unit_std(self):
        q = stream(0, "q").normal(2.0, 3.0, size=500)
        q_star = standardize_quality(q)
        assert abs(q_star.mean()) < 1e-9
        assert abs(q_star.std() - 1.0) < 1e-9

    def test_affine_invariance_positive_scale(self):
        q = stream(1, "q").normal(size=100)
        a = standardize_quality(q)
        b = standardize_quality(2.0 * q + 5.0)
        assert np.allclose(a, b, atol=1e-9)

    def test_too_short_rejected(self):
        with pytest.raises(DataFormatError):
            standardize_quality(np.array([]))
        with pytest.raises(DataFormatError):
            standardize_quality(np.array([1.0]))


class TestReweight:
    def test_midpoint(self):
        wv = weight_reweight(np.zeros(3))
        assert np.all(wv.values == 0.5)
        assert wv.mode == "reweight"

    def test_hand_sigmoid_chain(self):
        q_star = standardize_quality(np.array([1.0, 2.0, 3.0]))
        wv = weight_reweight(q_star)
        assert np.allclose(wv.values, [0.2271, 0.5000, 0.7729], atol=1e-4)

    def test_open_bounds_even_for_extreme_inputs(self):
        wv = weight_reweight(np.array([-1e6, -50.0, 0.0, 50.0, 1e6]))
        assert np.all(wv.values > 0.0)
        assert np.all(wv.values < 1.0)

    @given(st.floats(-30, 30))
    @settings(max_examples=50, deadline=None)
    def test_sigmoid_symmetry(self, x):
        w = weight_reweight(np.array([x, -x])).values
        assert abs(w[0] + w[1] - 1.0) < 1e-12

    def test_strictly_increasing(self):
        xs = np.linspace(-30, 30, 301)
        w = weight_reweight(xs).values
        assert np.all(np.diff(w) > 0)

    def test_renormalized_mean_one(self):
        q_star = stream(2, "q").normal(size=40)
        wv = weight_reweight(q_star, renormalize_mean=True)
        assert wv.renormalized
        assert wv.values.mean() == pytest.approx(1.0, abs=1e-12)


class TestPrune:
    def test_no_flags_is_all_ones(self):
        wv = weight_prune(np.zeros(6, dtype=bool))
        assert np.all(wv.values == 1.0)
        assert wv.n_pruned == 0

    def test_counts(self):
        flags = np.zeros(100, dtype=bool)
        flags[:10] = True
        wv = weight_prune(flags)
        assert np.sum(wv.values == 1.0) == 90
        assert wv.n_pruned == 10

    def test_idempotent(self):
        flags = stream(3, "f").random(30) < 0.3
        once = weight_prune(flags)
        again = weight_prune(once.values == 0.0)
        assert np.array_equal(once.values, again.values)

    def test_all_flagged_aborts_training(self):
        rng = stream(4, "x")
        X = rng.normal(size=(12, 5))
        y = np.arange(12) % 2
        wv = weight_prune(np.ones(12, dtype=bool))
        with pytest.raises(EmptyEffectiveDatasetError, match="empty effective dataset"):
            train(MlpConfig(layer_sizes=(5, 2), epochs=2, batch_size=4), X, y, wv.values)


class TestWeightVector:
    def test_mode_invariants_enforced(self):
        with pytest.raises(DataFormatError):
            WeightVector(values=np.array([0.5, 1.0]), mode="baseline")
        with pytest.raises(DataFormatError):
            WeightVector(values=np.array([0.5, 1.0]), mode="prune")
        with pytest.raises(DataFormatError):
            WeightVector(values=np.array([0.0, 0.5]), mode="reweight")
        with pytest.raises(ConfigError):
            WeightVector(values=np.ones(2), mode="mystery")

    def test_weights_for_mode(self):
        quality = np.array([0.9, -0.5, 0.3])
        flags = np.array([False, True, False])
        assert np.all(weights_for_mode("baseline", 3).values == 1.0)
        assert np.array_equal(weights_for_mode("emo_p", 3, flags=flags).values, [1, 0, 1])
        wr = weights_for_mode("emo_r", 3, quality=quality)
        assert np.all((wr.values > 0) & (wr.values < 1))
        with pytest.raises(ConfigError):
            weights_for_mode("emo_p", 3)
        with pytest.raises(ConfigError):
            weights_for_mode("turbo", 3)

    def test_csv_round_trip(self, tmp_path):
        wv = weight_prune(np.array([True, False, False]))
        write_weights_csv(wv, tmp_path / "w.csv")
        lines = (tmp_path / "w.csv").read_text().strip().splitlines()
        assert lines[0] == "sample_id,weight,mode"
        assert lines[1] == "0,0.0,prune"
        assert len(lines) == 4
