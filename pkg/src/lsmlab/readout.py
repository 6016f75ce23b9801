"""Spiking classifier layer trained with the calcium-gated probabilistic rule.

One LIF readout neuron per class integrates the reservoir spikes through
excitatory second-order synapses. During training a large forcing current
steers the desired (undesired) neuron to spike more (less); each neuron's
calcium trace low-pass filters its own spikes, and whenever a presynaptic
neuron fires, synapses onto neurons whose calcium sits just above (below) the
threshold are potentiated (depressed) with a coin flip. The most-spiking
readout neuron is the classification decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spikes import TIME_STEP_MS, SpikeRaster
from .reservoir import ReservoirConfig, ReservoirTopology, simulate_batch


@dataclass(frozen=True)
class ClassifierConfig:
    n_classes: int = 10
    tau_ca: float = 64.0        # calcium time constant, ms
    ca_theta: float = 10.0      # calcium threshold
    ca_band: float = 2.0        # update band half-width
    ca_hyst: float = 1.0        # teacher hysteresis
    i_teach: float = 10000.0    # forcing current magnitude
    p_plus: float = 0.1
    p_minus: float = 0.1
    dw: float = 0.01            # weight increment
    w_lim: float = 8.0          # weight clip
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n_classes <= 0:
            raise ValueError("need at least one class")
        if not self.ca_hyst < self.ca_band:
            raise ValueError("teacher hysteresis must be smaller than the update band")
        for name in ("p_plus", "p_minus"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.w_lim <= 0 or self.dw <= 0:
            raise ValueError("w_lim and dw must be positive")
        if self.tau_ca <= 0:
            raise ValueError("tau_ca must be positive")


class ReadoutState:
    """Trainable readout weights plus the per-neuron calcium/membrane state."""

    def __init__(self, n_classes: int, n_pre: int):
        self.weights = np.zeros((n_classes, n_pre))
        self.calcium = np.zeros(n_classes)
        self.v = np.zeros(n_classes)

    def reset_transient(self) -> None:
        """Clear membrane and calcium state (weights persist across samples)."""
        self.calcium[:] = 0.0
        self.v[:] = 0.0

    def copy(self) -> "ReadoutState":
        other = ReadoutState(*self.weights.shape)
        other.weights = self.weights.copy()
        other.calcium = self.calcium.copy()
        other.v = self.v.copy()
        return other


def calcium_update(c, spiked, h: float = TIME_STEP_MS, tau_ca: float = 64.0):
    """One step of the calcium trace: exponential decay plus a unit spike bump."""
    return c * math.exp(-h / tau_ca) + np.asarray(spiked, dtype=np.float64) * 1.0


def teacher_current(c, desired, config: ClassifierConfig):
    """Forcing current gated by the calcium trace.

    Desired neurons receive +i_teach while c < ca_theta + ca_hyst; undesired
    neurons receive -i_teach while c > ca_theta - ca_hyst; zero otherwise
    (boundaries excluded).
    """
    c = np.asarray(c, dtype=np.float64)
    desired = np.asarray(desired, dtype=bool)
    on_desired = desired & (c < config.ca_theta + config.ca_hyst)
    on_undesired = ~desired & (c > config.ca_theta - config.ca_hyst)
    out = np.where(on_desired, config.i_teach, 0.0)
    out = np.where(on_undesired, -config.i_teach, out)
    if out.ndim == 0:
        return float(out)
    return out


def learning_step(state: ReadoutState, pre_spiked: np.ndarray,
                  config: ClassifierConfig, rng: np.random.Generator) -> ReadoutState:
    """Probabilistic weight update for one step's presynaptic spikes.

    For every presynaptic neuron that spiked, each readout neuron whose
    calcium lies strictly inside (ca_theta, ca_theta + ca_band) gains dw on
    that synapse with probability p_plus; strictly inside
    (ca_theta - ca_band, ca_theta) it loses dw with probability p_minus.
    Weights are clipped to [-w_lim, +w_lim]. Coin flips are independent per
    synapse.
    """
    pre_idx = np.flatnonzero(pre_spiked)
    if pre_idx.size == 0:
        return state
    c = state.calcium
    upper = np.flatnonzero((c > config.ca_theta) & (c < config.ca_theta + config.ca_band))
    lower = np.flatnonzero((c > config.ca_theta - config.ca_band) & (c < config.ca_theta))
    touched = False
    if upper.size:
        coins = rng.random((upper.size, pre_idx.size)) < config.p_plus
        state.weights[np.ix_(upper, pre_idx)] += config.dw * coins
        touched = True
    if lower.size:
        coins = rng.random((lower.size, pre_idx.size)) < config.p_minus
        state.weights[np.ix_(lower, pre_idx)] -= config.dw * coins
        touched = True
    if touched:
        np.clip(state.weights, -config.w_lim, config.w_lim, out=state.weights)
    return state


def save_weights_csv(weights: np.ndarray, path) -> None:
    """Trained weights as plain CSV: one readout neuron per row, repr-exact floats."""
    rows = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    lines = [",".join(repr(v) for v in row) for row in rows.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights_csv(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().strip().splitlines() if ln.strip()]
    return np.array([[float(v) for v in ln.split(",")] for ln in lines])


def classify(counts) -> tuple[int, bool]:
    """Most-spiking readout neuron wins; ties break to the lowest index.

    Returns (class index, all_silent); an all-silent readout falls back to
    class 0 with the flag set.
    """
    counts = np.asarray(counts)
    return int(np.argmax(counts)), bool(counts.sum() == 0)


def run_readout_sample(pre_spikes: np.ndarray, state: ReadoutState,
                       res_cfg: ReservoirConfig, clf_cfg: ClassifierConfig,
                       teach_label: int | None = None,
                       rng: np.random.Generator | None = None,
                       record_spikes: bool = False):
    """Drive the readout layer with one sample's presynaptic spike grid.

    ``pre_spikes`` is a boolean (n_pre, n_steps) grid. With ``teach_label``
    set, teacher currents are injected and the probabilistic weight update
    runs (requires ``rng``); without it the pass is frozen evaluation.
    Membrane and calcium state are reset at the sample start. Returns the
    per-neuron spike counts, plus the (L, n_steps) spike grid when
    ``record_spikes`` is on.
    """
    if teach_label is not None and rng is None:
        raise ValueError("training pass needs an RNG for the update coins")
    h = TIME_STEP_MS
    n_pre, n_steps = pre_spikes.shape
    n_out = clf_cfg.n_classes
    d_steps = int(round(res_cfg.delay_ms / h))
    t_rp_steps = int(round(res_cfg.t_refrac / h))
    decay_mem = 1.0 - h / res_cfg.tau_mem
    decay_ca = math.exp(-h / clf_cfg.tau_ca)
    decay1 = math.exp(-h / res_cfg.tau1_exc)
    decay2 = math.exp(-h / res_cfg.tau2_exc)
    inv_e = 1.0 / (res_cfg.tau1_exc - res_cfg.tau2_exc)

    state.reset_transient()
    weights = state.weights
    v = state.v
    c = state.calcium
    acc1 = np.zeros(n_out)
    acc2 = np.zeros(n_out)
    ref = np.zeros(n_out, dtype=np.int32)
    counts = np.zeros(n_out, dtype=np.int64)
    desired = None
    if teach_label is not None:
        desired = np.zeros(n_out, dtype=bool)
        desired[teach_label] = True
    spike_grid = np.zeros((n_out, n_steps), dtype=bool) if record_spikes else None

    pre_idx_by_step = [np.flatnonzero(pre_spikes[:, t]) for t in range(n_steps)]

    for t in range(n_steps):
        acc1 *= decay1
        acc2 *= decay2
        td = t - d_steps
        if td >= 0:
            idx = pre_idx_by_step[td]
            if idx.size:
                add = weights[:, idx].sum(axis=1) * inv_e
                acc1 += add
                acc2 += add
        i_syn = acc1 - acc2
        if desired is not None:
            i_syn = i_syn + teacher_current(c, desired, clf_cfg)

        inactive = ref > 0
        v *= decay_mem
        v += h * i_syn
        v[inactive] = 0.0
        np.maximum(v, 0.0, out=v)
        fired = v > res_cfg.v_th
        v[fired] = 0.0
        ref[inactive] -= 1
        ref[fired] = t_rp_steps
        counts += fired
        if spike_grid is not None:
            spike_grid[:, t] = fired

        c *= decay_ca
        c += fired

        if teach_label is not None:
            learning_step(state, pre_spikes[:, t], clf_cfg, rng)

    if record_spikes:
        return counts, spike_grid
    return counts


def eval_counts_batch(spike_sets: list[np.ndarray], weights: np.ndarray,
                      res_cfg: ReservoirConfig, clf_cfg: ClassifierConfig) -> np.ndarray:
    """Frozen-readout spike counts for many samples at once.

    Evaluation has no teacher and no learning, so samples are independent and
    the step loop vectorizes across the batch. Returns an (n_samples,
    n_classes) count array identical to per-sample frozen passes.
    """
    if not spike_sets:
        return np.zeros((0, clf_cfg.n_classes), dtype=np.int64)
    h = TIME_STEP_MS
    n_pre, n_steps = spike_sets[0].shape
    n_out = clf_cfg.n_classes
    n_batch = len(spike_sets)
    d_steps = int(round(res_cfg.delay_ms / h))
    t_rp_steps = int(round(res_cfg.t_refrac / h))
    decay_mem = 1.0 - h / res_cfg.tau_mem
    decay1 = math.exp(-h / res_cfg.tau1_exc)
    decay2 = math.exp(-h / res_cfg.tau2_exc)
    inv_e = 1.0 / (res_cfg.tau1_exc - res_cfg.tau2_exc)

    pre = np.stack(spike_sets, axis=-1).astype(np.float64)  # (n_pre, T, B)
    drive = (weights @ pre.reshape(n_pre, -1)).reshape(n_out, n_steps, n_batch)
    drive *= inv_e

    acc1 = np.zeros((n_out, n_batch))
    acc2 = np.zeros((n_out, n_batch))
    v = np.zeros((n_out, n_batch))
    ref = np.zeros((n_out, n_batch), dtype=np.int32)
    counts = np.zeros((n_out, n_batch), dtype=np.int64)

    for t in range(n_steps):
        acc1 *= decay1
        acc2 *= decay2
        td = t - d_steps
        if td >= 0:
            acc1 += drive[:, td]
            acc2 += drive[:, td]
        i_syn = acc1 - acc2
        inactive = ref > 0
        v *= decay_mem
        v += h * i_syn
        v[inactive] = 0.0
        np.maximum(v, 0.0, out=v)
        fired = v > res_cfg.v_th
        v[fired] = 0.0
        ref[inactive] -= 1
        ref[fired] = t_rp_steps
        counts += fired
    return counts.T


def train_pass(spike_sets: list[np.ndarray], labels: list[int], state: ReadoutState,
               res_cfg: ReservoirConfig, clf_cfg: ClassifierConfig,
               rng: np.random.Generator) -> ReadoutState:
    """One supervised sweep over pre-simulated spike grids, in shuffled order."""
    order = rng.permutation(len(spike_sets))
    for i in order:
        run_readout_sample(spike_sets[i], state, res_cfg, clf_cfg,
                           teach_label=labels[i], rng=rng)
    return state


def accuracy_from_counts(counts: np.ndarray, labels) -> float:
    predictions = np.argmax(counts, axis=1)
    return float(np.mean(predictions == np.asarray(labels)))


def train_epoch(topology: ReservoirTopology, samples: list[tuple[SpikeRaster, int]],
                state: ReadoutState, res_cfg: ReservoirConfig,
                clf_cfg: ClassifierConfig, rng: np.random.Generator) -> tuple[ReadoutState, float]:
    """One training epoch over labeled samples; returns post-epoch training accuracy.

    Every sample's reservoir response is simulated fresh, the readout learns
    on it in shuffled order, and accuracy is then measured with a frozen pass
    over the same samples.
    """
    if not samples:
        raise ValueError("empty dataset")
    labels = [label for _, label in samples]
    if any(not 0 <= lab < clf_cfg.n_classes for lab in labels):
        raise ValueError("label outside the configured class range")
    liquid = [r.binned for r in simulate_batch(topology, [s for s, _ in samples], res_cfg)]
    train_pass(liquid, labels, state, res_cfg, clf_cfg, rng)
    counts = eval_counts_batch(liquid, state.weights, res_cfg, clf_cfg)
    return state, accuracy_from_counts(counts, labels)


def evaluate(topology: ReservoirTopology, samples: list[tuple[SpikeRaster, int]],
             weights: np.ndarray, res_cfg: ReservoirConfig,
             clf_cfg: ClassifierConfig) -> tuple[float, np.ndarray]:
    """Frozen evaluation accuracy on labeled samples; returns (accuracy, predictions)."""
    labels = [label for _, label in samples]
    liquid = [r.binned for r in simulate_batch(topology, [s for s, _ in samples], res_cfg)]
    counts = eval_counts_batch(liquid, weights, res_cfg, clf_cfg)
    return accuracy_from_counts(counts, labels), np.argmax(counts, axis=1)


def baseline_reservoirless(dataset, clf_cfg: ClassifierConfig,
                           res_cfg: ReservoirConfig | None = None,
                           folds: int = 2, seed: int = 0,
                           epochs: int | None = None) -> tuple[float, list[float]]:
    """Feed-forward benchmark: input channels wired straight to the readout.

    Same neurons, same learning rule, same k-fold protocol as the reservoir
    runs, but the presynaptic spikes are the raw input channels. Returns the
    mean test accuracy over folds (averaged per epoch) and the per-epoch
    curve.
    """
    from .dataset import kfold_split  # local import to avoid a cycle

    if res_cfg is None:
        res_cfg = ReservoirConfig()
    n_epochs = clf_cfg.epochs if epochs is None else epochs
    splits = kfold_split(dataset, folds, seed)
    rasters = [s for s, _ in dataset.samples]
    labels = np.array([lab for _, lab in dataset.samples])
    grids = [r.binned for r in rasters]

    fold_curves = []
    for f, (train_idx, test_idx) in enumerate(splits):
        rng = np.random.default_rng([seed, 3, f])
        state = ReadoutState(clf_cfg.n_classes, rasters[0].n_channels)
        train_grids = [grids[i] for i in train_idx]
        train_labels = [int(labels[i]) for i in train_idx]
        test_grids = [grids[i] for i in test_idx]
        curve = []
        for _ in range(n_epochs):
            train_pass(train_grids, train_labels, state, res_cfg, clf_cfg, rng)
            counts = eval_counts_batch(test_grids, state.weights, res_cfg, clf_cfg)
            curve.append(accuracy_from_counts(counts, labels[test_idx]))
        if n_epochs == 0:
            counts = eval_counts_batch(test_grids, state.weights, res_cfg, clf_cfg)
            curve.append(accuracy_from_counts(counts, labels[test_idx]))
        fold_curves.append(curve)
    per_epoch = [float(np.mean([c[e] for c in fold_curves])) for e in range(len(fold_curves[0]))]
    return per_epoch[-1], per_epoch
