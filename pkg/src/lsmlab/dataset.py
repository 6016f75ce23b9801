"""Jittered-Poisson spike classification dataset and fold splitting."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .spikes import SpikeRaster, load_raster_csv, save_raster_csv


@dataclass(frozen=True)
class DatasetConfig:
    n_classes: int = 10
    channels: int = 10
    rate_hz: float = 40.0
    sample_len_ms: int = 200
    jitter_sd_ms: float = 16.0
    samples_per_class: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.rate_hz < 0:
            raise ValueError("rate_hz must be non-negative")
        if self.sample_len_ms <= 0:
            raise ValueError("sample_len_ms must be positive")
        if self.jitter_sd_ms < 0:
            raise ValueError("jitter_sd_ms must be non-negative")
        if self.n_classes <= 0 or self.channels <= 0 or self.samples_per_class <= 0:
            raise ValueError("counts must be positive")


@dataclass
class LabeledDataset:
    config: DatasetConfig
    templates: list[SpikeRaster]
    samples: list[tuple[SpikeRaster, int]]

    @property
    def labels(self) -> np.ndarray:
        return np.array([label for _, label in self.samples], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.samples)


def generate_templates(config: DatasetConfig) -> list[SpikeRaster]:
    """One homogeneous-Poisson template raster per class.

    The process is realized as independent Bernoulli(rate * 1ms) draws on the
    1 ms grid, which keeps spikes exactly grid-aligned (duplicate grid times
    cannot occur by construction). Deterministic given the config seed.
    """
    p = config.rate_hz / 1000.0
    templates = []
    for c in range(config.n_classes):
        rng = np.random.default_rng([config.seed, 0, c])
        grid = rng.random((config.channels, config.sample_len_ms)) < p
        templates.append(SpikeRaster.from_binned(grid, duration=config.sample_len_ms))
    return templates


def jitter_sample(template: SpikeRaster, jitter_sd: float, seed) -> SpikeRaster:
    """Gaussian temporal jitter of every template spike, re-snapped to the grid.

    Spikes landing outside [0, duration) are removed; grid collisions within a
    channel collapse to a single event.
    """
    rng = np.random.default_rng(seed)
    shifts = rng.normal(0.0, jitter_sd, size=template.n_events)
    times = np.rint(template.times + shifts).astype(np.int64)
    keep = (times >= 0) & (times < template.duration)
    channels = template.channels[keep]
    times = times[keep]
    key = np.unique(times * template.n_channels + channels)
    return SpikeRaster(
        n_channels=template.n_channels,
        duration=template.duration,
        channels=key % template.n_channels,
        times=key // template.n_channels,
    )


def generate_dataset(config: DatasetConfig) -> LabeledDataset:
    templates = generate_templates(config)
    samples = []
    for c in range(config.n_classes):
        for i in range(config.samples_per_class):
            raster = jitter_sample(templates[c], config.jitter_sd_ms, [config.seed, 1, c, i])
            samples.append((raster, c))
    return LabeledDataset(config=config, templates=templates, samples=samples)


def kfold_split(dataset, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Class-stratified k-fold split over sample indices.

    Returns (train_indices, test_indices) per fold; the test folds partition
    the dataset and each fold's per-class counts differ by at most one.
    """
    labels = dataset.labels if hasattr(dataset, "labels") else np.asarray(dataset, dtype=np.int64)
    if k < 2:
        raise ValueError("k-fold needs k >= 2")
    classes, counts = np.unique(labels, return_counts=True)
    if k > counts.min():
        raise ValueError(f"k={k} exceeds the smallest class count ({counts.min()})")
    rng = np.random.default_rng([seed, 4])
    test_chunks: list[list[np.ndarray]] = [[] for _ in range(k)]
    for c in classes:
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(idx)
        for f, chunk in enumerate(np.array_split(perm, k)):
            test_chunks[f].append(chunk)
    all_idx = np.arange(labels.size)
    splits = []
    for f in range(k):
        test_idx = np.sort(np.concatenate(test_chunks[f]))
        train_idx = np.setdiff1d(all_idx, test_idx)
        splits.append((train_idx, test_idx))
    return splits


def save_dataset(dataset: LabeledDataset, out_dir) -> Path:
    """Write dataset.json plus one raster CSV per sample (class<k>_sample<n>.csv)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.json").write_text(
        json.dumps({"config": asdict(dataset.config), "n_samples": len(dataset)},
                   sort_keys=True, indent=2))
    counters: dict[int, int] = {}
    for raster, label in dataset.samples:
        n = counters.get(label, 0)
        counters[label] = n + 1
        save_raster_csv(raster, out / f"class{label}_sample{n}.csv")
    return out


def load_dataset(in_dir) -> LabeledDataset:
    """Read a dataset directory; templates are regenerated from the stored config."""
    root = Path(in_dir)
    meta = json.loads((root / "dataset.json").read_text())
    cfg_dict = dict(meta["config"])
    config = DatasetConfig(**cfg_dict)
    samples = []
    for c in range(config.n_classes):
        for i in range(config.samples_per_class):
            path = root / f"class{c}_sample{i}.csv"
            if not path.exists():
                raise FileNotFoundError(f"dataset sample missing: {path}")
            samples.append((load_raster_csv(path), c))
    return LabeledDataset(config=config, templates=generate_templates(config), samples=samples)
