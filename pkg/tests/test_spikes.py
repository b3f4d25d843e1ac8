import numpy as np
import pytest

from emonet.dataset import LabeledDataset
from emonet.errors import DataFormatError
from emonet.rng import stream
from emonet.spikes import (
    SpikeTrain,
    TrialMatrix,
    WindowSpec,
    add_gaussian_noise,
    assemble_trial,
    bin_firing_rates,
    dropout_augment,
    read_spike_file,
    spikes_to_dataset,
    standardize,
)


def brute_force_rates(timestamps, spec):
    """Independent oracle: count each window by direct interval scan."""
    rates = []
    for k in range(spec.n_bins):
        lo = spec.t_start_ms + k * spec.step_ms
        hi = lo + spec.window_ms
        count = sum(1 for t in timestamps if lo <= t < hi)
        rates.append(count / (spec.window_ms / 1000.0))
    return np.array(rates)


class TestWindowSpec:
    def test_defaults_give_96_bins(self):
        assert WindowSpec().n_bins == 96

    def test_bin_count_arithmetic(self):
        assert WindowSpec(window_ms=10, step_ms=5, t_start_ms=0, t_end_ms=30).n_bins == 5

    def test_indivisible_span_rejected(self):
        with pytest.raises(DataFormatError):
            WindowSpec(window_ms=48, step_ms=16, t_start_ms=0, t_end_ms=100)


class TestBinFiringRates:
    def test_no_spikes_all_zero(self):
        rates = bin_firing_rates(SpikeTrain(unit_id=0))
        assert rates.shape == (96,)
        assert np.all(rates == 0.0)

    def test_length_is_96_for_defaults(self):
        rates = bin_firing_rates(SpikeTrain(0, [0.0, 100.0, 500.0]))
        assert len(rates) == 96

    def test_hand_counted_first_bin(self):
        # first window covers [-200, -152): two of the three spikes land in it
        rates = bin_firing_rates(SpikeTrain(0, [-190.0, -180.0, -150.0]))
        assert rates[0] == pytest.approx(2 / 0.048)

    def test_matches_brute_force_oracle(self):
        spec = WindowSpec()
        rng = stream(42, "oracle")
        for _ in range(1000):
            n = int(rng.integers(0, 40))
            ts = np.sort(rng.uniform(spec.t_start_ms, spec.t_end_ms, size=n))
            ts = np.unique(ts)  # strict ascent
            got = bin_firing_rates(SpikeTrain(0, ts), spec)
            assert np.array_equal(got, brute_force_rates(ts, spec))

    def test_non_monotonic_rejected(self):
        with pytest.raises(DataFormatError):
            bin_firing_rates(SpikeTrain(0, [10.0, 5.0]))

    def test_out_of_range_rejected(self):
        with pytest.raises(DataFormatError):
            bin_firing_rates(SpikeTrain(0, [-300.0]))
        with pytest.raises(DataFormatError):
            bin_firing_rates(SpikeTrain(0, [1400.0]))


class TestAssembleTrial:
    def test_all_silent_gives_zero_matrix(self):
        trains = [SpikeTrain(u) for u in range(64)]
        m = assemble_trial(trains)
        assert m.values.shape == (64, 96)
        assert np.all(m.values == 0.0)

    def test_order_independent(self):
        rng = stream(1, "assemble")
        trains = [
            SpikeTrain(u, np.sort(rng.uniform(-200, 1368, size=5))) for u in range(64)
        ]
        a = assemble_trial(trains)
        b = assemble_trial(list(reversed(trains)))
        assert np.array_equal(a.values, b.values)

    def test_one_spiking_unit(self):
        trains = [SpikeTrain(u) for u in range(64)]
        trains[17] = SpikeTrain(17, [0.0, 10.0, 20.0])
        m = assemble_trial(trains)
        nonzero_rows = np.flatnonzero(m.values.any(axis=1))
        assert list(nonzero_rows) == [17]

    def test_missing_unit_rejected(self):
        trains = [SpikeTrain(u) for u in range(63)]
        with pytest.raises(DataFormatError, match="missing"):
            assemble_trial(trains)

    def test_duplicate_unit_rejected(self):
        trains = [SpikeTrain(u) for u in range(64)]
        trains[5] = SpikeTrain(4)
        with pytest.raises(DataFormatError, match="duplicate"):
            assemble_trial(trains)


class TestStandardize:
    def test_hand_computed_2x2(self):
        m = TrialMatrix(values=[[1.0, 2.0], [3.0, 4.0]], label=0, trial_id=0)
        z = standardize(m)
        expected = np.array([[-1.3416, -0.4472], [0.4472, 1.3416]])
        assert np.allclose(z.values, expected, atol=1e-4)
        assert not z.degenerate

    def test_zero_mean_unit_std(self):
        rng = stream(2, "std")
        m = TrialMatrix(values=rng.uniform(0, 50, size=(64, 96)), label=0, trial_id=0)
        z = standardize(m)
        assert abs(z.values.mean()) < 1e-9
        assert abs(z.values.std() - 1.0) < 1e-9

    def test_idempotent(self):
        rng = stream(3, "std")
        m = TrialMatrix(values=rng.uniform(0, 50, size=(8, 12)), label=0, trial_id=0)
        once = standardize(m)
        twice = standardize(once)
        assert np.allclose(once.values, twice.values, atol=1e-9)

    def test_constant_matrix_flagged(self):
        m = TrialMatrix(values=np.full((4, 4), 0.1), label=0, trial_id=0)
        z = standardize(m)
        assert z.degenerate
        assert np.all(z.values == 0.0)


class TestGaussianNoise:
    def test_zero_variance_is_exact_shift(self):
        m = TrialMatrix(values=np.zeros((4, 4)), label=0, trial_id=0)
        noised = add_gaussian_noise(m, stream(0, "n"), mean=1.0, variance=0.0)
        assert np.all(noised.values == 1.0)

    def test_sample_mean_near_one(self):
        m = TrialMatrix(values=np.zeros((64, 96)), label=0, trial_id=0)
        noised = add_gaussian_noise(m, stream(5, "n"))
        # mean of 6144 draws from N(1, 0.005): 3 sigma of the mean
        tol = 3 * np.sqrt(0.005) / np.sqrt(64 * 96)
        assert abs(noised.values.mean() - 1.0) < tol

    def test_seed_determinism(self):
        m = TrialMatrix(values=np.zeros((8, 8)), label=0, trial_id=0)
        a = add_gaussian_noise(m, stream(9, "n"))
        b = add_gaussian_noise(m, stream(9, "n"))
        assert np.array_equal(a.values, b.values)


def _flat_dataset(n=30, n_classes=3):
    rng = stream(11, "ds")
    labels = np.arange(n) % n_classes
    return LabeledDataset(
        features=rng.normal(1.0, 1.0, size=(n, 4, 6)).astype(np.float32),
        noisy_labels=labels,
        true_labels=labels.copy(),
        class_names=[f"c{i}" for i in range(n_classes)],
    )


class TestDropoutAugment:
    def test_rate_zero_exact_duplicates(self):
        ds = _flat_dataset()
        out = dropout_augment(ds, rate=0.0, copies=1, seed=1)
        assert out.n_samples == 2 * ds.n_samples
        assert np.array_equal(out.features[ds.n_samples :], ds.features)

    def test_copies_zero_unchanged(self):
        ds = _flat_dataset()
        out = dropout_augment(ds, rate=0.08, copies=0, seed=1)
        assert out.n_samples == ds.n_samples
        assert np.array_equal(out.features, ds.features)

    def test_zeroed_fraction_near_rate(self):
        ds = _flat_dataset(n=200)
        out = dropout_augment(ds, rate=0.08, copies=2, seed=2)
        copies = out.features[ds.n_samples :]
        frac = np.mean(copies == 0.0)
        n_entries = copies.size
        tol = 4 * np.sqrt(0.08 * 0.92 / n_entries)
        assert abs(frac - 0.08) < tol

    def test_label_distribution_scales(self):
        ds = _flat_dataset(n=30)
        out = dropout_augment(ds, rate=0.08, copies=3, seed=3)
        assert np.array_equal(out.class_counts(), 4 * ds.class_counts())

    def test_parent_tags(self):
        ds = _flat_dataset(n=10)
        out = dropout_augment(ds, rate=0.5, copies=2, seed=4)
        parents = out.extra["augment"]["parent_ids"]
        assert len(parents) == 30
        assert parents[:10] == list(range(10))
        assert parents[10:] == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9]

    def test_bad_rate_rejected(self):
        ds = _flat_dataset()
        with pytest.raises(DataFormatError):
            dropout_augment(ds, rate=1.0, copies=1, seed=0)
        with pytest.raises(DataFormatError):
            dropout_augment(ds, rate=-0.1, copies=1, seed=0)


class TestSpikeFileImport:
    def write_files(self, tmp_path, n_trials=6, n_units=64):
        rng = stream(21, "import")
        spike_lines = ["# trial_id,unit_id,timestamp_ms"]
        label_lines = []
        for trial in range(n_trials):
            label_lines.append(f"{trial},{trial % 2}")
            for unit in range(n_units):
                if rng.random() < 0.7:
                    times = np.sort(rng.uniform(-200, 1368, size=int(rng.integers(1, 6))))
                    spike_lines += [f"{trial},{unit},{t:.3f}" for t in times]
        spikes = tmp_path / "spikes.csv"
        labels = tmp_path / "labels.csv"
        spikes.write_text("\n".join(spike_lines) + "\n")
        labels.write_text("\n".join(label_lines) + "\n")
        return spikes, labels

    def test_round_trip_shapes(self, tmp_path):
        spikes, labels = self.write_files(tmp_path)
        ds = spikes_to_dataset(spikes, labels, class_names=["a", "b"], seed=5)
        assert ds.features.shape == (6, 64, 96)
        assert set(ds.noisy_labels) == {0, 1}

    def test_parse_rejects_malformed(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n")
        with pytest.raises(DataFormatError):
            read_spike_file(bad)

    def test_unlabeled_trial_rejected(self, tmp_path):
        spikes = tmp_path / "s.csv"
        labels = tmp_path / "l.csv"
        spikes.write_text("0,0,5.0\n1,0,5.0\n")
        labels.write_text("0,1\n")
        with pytest.raises(DataFormatError, match="no label"):
            spikes_to_dataset(spikes, labels, class_names=["a", "b"])
