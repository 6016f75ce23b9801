import numpy as np
import pytest

from lsmlab.dataset import (DatasetConfig, LabeledDataset, generate_dataset,
                            generate_templates, jitter_sample, kfold_split,
                            load_dataset, save_dataset)
from lsmlab.spikes import SpikeRaster, extract_rates


class TestTemplates:
    def test_poisson_mean_spike_count(self):
        # 40 Hz over 200 ms -> 8 expected spikes per channel; check the mean
        # over 10^4 channel draws within 3 sigma of the Bernoulli-grid process
        cfg = DatasetConfig(n_classes=100, channels=100, seed=11)
        templates = generate_templates(cfg)
        counts = np.array([t.n_events / t.n_channels for t in templates])
        per_channel_var = 200 * 0.04 * 0.96
        sigma_mean = np.sqrt(per_channel_var / (100 * 100))
        assert abs(counts.mean() - 8.0) < 3 * sigma_mean

    def test_zero_rate_empty(self):
        cfg = DatasetConfig(rate_hz=0.0, seed=1)
        assert all(t.n_events == 0 for t in generate_templates(cfg))

    def test_deterministic(self):
        cfg = DatasetConfig(seed=21)
        a = generate_templates(cfg)
        b = generate_templates(cfg)
        assert all(x.events == y.events for x, y in zip(a, b))

    def test_distinct_seeds_differ(self):
        a = generate_templates(DatasetConfig(seed=1))
        b = generate_templates(DatasetConfig(seed=2))
        assert any(x.events != y.events for x, y in zip(a, b))


class TestJitter:
    def test_zero_jitter_is_identity(self):
        template = generate_templates(DatasetConfig(seed=3))[0]
        out = jitter_sample(template, 0.0, seed=99)
        assert out.events == template.events

    def test_never_gains_spikes(self):
        template = generate_templates(DatasetConfig(seed=4))[0]
        for seed in range(20):
            assert jitter_sample(template, 16.0, seed).n_events <= template.n_events

    def test_out_of_window_spikes_removed(self):
        template = SpikeRaster.from_events(1, 20, [(0, 1), (0, 18)])
        survivors = [jitter_sample(template, 30.0, s).n_events for s in range(200)]
        assert min(survivors) < 2  # big jitter pushes spikes off the sample

    def test_empirical_sd_matches(self):
        # one spike per channel at t=100, far from both boundaries; pool
        # displacements over many draws and compare the sd with the nominal 16
        n_channels = 2000
        template = SpikeRaster(
            n_channels=n_channels, duration=200,
            channels=np.arange(n_channels, dtype=np.int64),
            times=np.full(n_channels, 100, dtype=np.int64))
        displacements = []
        for seed in range(50):
            out = jitter_sample(template, 16.0, seed)
            displacements.extend((out.times - 100.0).tolist())
        sd = np.std(displacements)
        assert abs(sd - 16.0) / 16.0 < 0.05


class TestGenerateDataset:
    def test_shapes_and_labels(self):
        cfg = DatasetConfig(n_classes=3, samples_per_class=5, channels=4,
                            sample_len_ms=100, seed=7)
        ds = generate_dataset(cfg)
        assert len(ds) == 15
        assert sorted(set(ds.labels.tolist())) == [0, 1, 2]
        assert all(r.n_channels == 4 and r.duration == 100 for r, _ in ds.samples)

    def test_samples_stay_near_own_template(self):
        # windowed-count distance: jittered samples should sit closer to the
        # template that produced them than to other templates, on average
        cfg = DatasetConfig(samples_per_class=5, seed=13)
        ds = generate_dataset(cfg)
        profiles = [extract_rates(t, window=50, step=10).values for t in ds.templates]
        own, other = [], []
        for raster, label in ds.samples:
            p = extract_rates(raster, window=50, step=10).values
            for c, tp in enumerate(profiles):
                d = np.linalg.norm(p - tp)
                (own if c == label else other).append(d)
        assert np.mean(own) < np.mean(other)


class TestKfold:
    def test_two_fold_balanced(self):
        ds = generate_dataset(DatasetConfig(samples_per_class=50, seed=5))
        splits = kfold_split(ds, 2, seed=1)
        assert len(splits) == 2
        for train_idx, test_idx in splits:
            assert len(test_idx) == 250 and len(train_idx) == 250
            per_class = np.bincount(ds.labels[test_idx], minlength=10)
            assert np.all(per_class == 25)

    def test_partition_property(self):
        ds = generate_dataset(DatasetConfig(n_classes=4, samples_per_class=10,
                                            channels=4, sample_len_ms=50, seed=6))
        splits = kfold_split(ds, 5, seed=2)
        all_test = np.concatenate([test for _, test in splits])
        assert sorted(all_test.tolist()) == list(range(len(ds)))
        for train_idx, test_idx in splits:
            assert not set(train_idx) & set(test_idx)

    def test_stratification_within_one(self):
        ds = generate_dataset(DatasetConfig(n_classes=3, samples_per_class=10,
                                            channels=4, sample_len_ms=50, seed=8))
        for _, test_idx in kfold_split(ds, 3, seed=3):
            per_class = np.bincount(ds.labels[test_idx], minlength=3)
            assert per_class.max() - per_class.min() <= 1

    def test_leave_one_out_single_class(self):
        ds = generate_dataset(DatasetConfig(n_classes=1, samples_per_class=6,
                                            channels=4, sample_len_ms=50, seed=9))
        splits = kfold_split(ds, 6, seed=4)
        assert len(splits) == 6
        assert all(len(test) == 1 for _, test in splits)

    def test_oversized_k_rejected(self):
        ds = generate_dataset(DatasetConfig(n_classes=2, samples_per_class=4,
                                            channels=4, sample_len_ms=50, seed=10))
        with pytest.raises(ValueError):
            kfold_split(ds, 5, seed=0)
        with pytest.raises(ValueError):
            kfold_split(ds, 1, seed=0)


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        cfg = DatasetConfig(n_classes=2, samples_per_class=3, channels=4,
                            sample_len_ms=60, seed=17)
        ds = generate_dataset(cfg)
        out = save_dataset(ds, tmp_path / "ds")
        assert (out / "dataset.json").exists()
        assert (out / "class0_sample0.csv").exists()
        assert (out / "class1_sample2.csv").exists()

        loaded = load_dataset(out)
        assert loaded.config == cfg
        assert len(loaded.samples) == len(ds.samples)
        for (ra, la), (rb, lb) in zip(loaded.samples, ds.samples):
            assert la == lb and ra.events == rb.events
        assert all(a.events == b.events for a, b in zip(loaded.templates, ds.templates))

    def test_missing_sample_rejected(self, tmp_path):
        cfg = DatasetConfig(n_classes=2, samples_per_class=2, channels=4,
                            sample_len_ms=60, seed=18)
        out = save_dataset(generate_dataset(cfg), tmp_path / "ds")
        (out / "class1_sample1.csv").unlink()
        with pytest.raises(FileNotFoundError):
            load_dataset(out)


def test_config_validation():
    with pytest.raises(ValueError):
        DatasetConfig(rate_hz=-1.0)
    with pytest.raises(ValueError):
        DatasetConfig(sample_len_ms=0)
    with pytest.raises(ValueError):
        DatasetConfig(jitter_sd_ms=-0.1)
