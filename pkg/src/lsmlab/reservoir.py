"""Randomly connected 3D-grid LIF reservoir and its fixed-step spiking simulation.

Construction follows a distance-dependent Bernoulli wiring rule on an integer
grid: an ordered pair (i, j) of neurons is connected with probability
K * exp(-D^2 / lam^2), where K and the synaptic weight depend on the
excitatory/inhibitory types of pre and post. Synapses are second order
(difference of two exponentials); membrane dynamics are leaky
integrate-and-fire advanced with forward Euler at a 1 ms step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .spikes import TIME_STEP_MS, SpikeRaster


@dataclass(frozen=True)
class ReservoirConfig:
    """Network and neuron parameters with standard 5x5x5 defaults."""

    grid_dims: tuple[int, int, int] = (5, 5, 5)
    f_plus: float = 0.85          # excitatory fraction
    lam: float = 2.0              # effective synaptic distance, grid units
    k_ee: float = 0.45            # connection probability prefactors, by (pre, post) type
    k_ei: float = 0.30
    k_ie: float = 0.60
    k_ii: float = 0.15
    w_ee: float = 3.0             # synaptic weights, by (pre, post) type
    w_ei: float = 6.0
    w_ie: float = -2.0
    w_ii: float = -2.0
    alpha_w: float = 1.0          # global scaling of recurrent weights
    w_in: float = 8.0             # input synapse magnitude (sign is a fair coin)
    f_in: int = 4                 # fan-out of each input channel
    delay_ms: float = 1.0
    tau1_exc: float = 8.0         # synapse kernel timescales, ms
    tau2_exc: float = 4.0
    tau1_inh: float = 4.0
    tau2_inh: float = 2.0
    tau_mem: float = 64.0         # membrane time constant, ms
    t_refrac: float = 3.0         # refractory period, ms
    v_th: float = 20.0            # threshold, mV
    seed: int = 0

    def __post_init__(self):
        if any(d <= 0 for d in self.grid_dims) or len(self.grid_dims) != 3:
            raise ValueError("grid_dims must be three positive counts")
        if not 0.0 <= self.f_plus <= 1.0:
            raise ValueError("f_plus must lie in [0, 1]")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        for name in ("k_ee", "k_ei", "k_ie", "k_ii"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for t1, t2 in ((self.tau1_exc, self.tau2_exc), (self.tau1_inh, self.tau2_inh)):
            if not t1 > t2 > 0:
                raise ValueError("synapse kernels need tau1 > tau2 > 0")
        if self.tau_mem <= 0:
            raise ValueError("tau_mem must be positive")
        if self.t_refrac < 0:
            raise ValueError("t_refrac must be non-negative")
        if self.v_th <= 0:
            raise ValueError("v_th must be positive")
        if self.f_in <= 0:
            raise ValueError("f_in must be positive")
        if self.delay_ms < 0 or abs(self.delay_ms - round(self.delay_ms)) > 1e-9:
            raise ValueError("delay_ms must be a whole non-negative number of ms")

    @property
    def n_neurons(self) -> int:
        nx, ny, nz = self.grid_dims
        return nx * ny * nz

    def with_updates(self, **kwargs) -> "ReservoirConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ReservoirTopology:
    """A realized reservoir: neuron grid, typed synapse list, and input map.

    Synapses are stored as parallel arrays; ``syn_kernel_exc[k]`` tells whether
    synapse k uses the excitatory or inhibitory second-order timescales (set by
    its presynaptic neuron's type). Input synapses always use the excitatory
    timescales.
    """

    positions: np.ndarray        # (n, 3) int grid coordinates
    is_excitatory: np.ndarray    # (n,) bool
    syn_pre: np.ndarray          # (S,) int
    syn_post: np.ndarray         # (S,) int
    syn_weight: np.ndarray       # (S,) float, sign matches pre type
    syn_delay_ms: np.ndarray     # (S,) float
    in_channel: np.ndarray       # (E,) int input channel per input synapse
    in_target: np.ndarray        # (E,) int target neuron
    in_weight: np.ndarray        # (E,) float, +/- w_in
    n_inputs: int

    @property
    def n_neurons(self) -> int:
        return self.positions.shape[0]

    @property
    def n_synapses(self) -> int:
        return self.syn_pre.size

    @property
    def syn_kernel_exc(self) -> np.ndarray:
        return self.is_excitatory[self.syn_pre]

    @cached_property
    def _dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(post, pre) weight matrices split by kernel type, plus the input map."""
        n = self.n_neurons
        w_exc = np.zeros((n, n))
        w_inh = np.zeros((n, n))
        kernel_exc = self.syn_kernel_exc
        w_exc[self.syn_post[kernel_exc], self.syn_pre[kernel_exc]] = self.syn_weight[kernel_exc]
        w_inh[self.syn_post[~kernel_exc], self.syn_pre[~kernel_exc]] = self.syn_weight[~kernel_exc]
        w_input = np.zeros((n, self.n_inputs))
        w_input[self.in_target, self.in_channel] = self.in_weight
        return w_exc, w_inh, w_input

    def to_json_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "positions": self.positions.tolist(),
            "is_excitatory": self.is_excitatory.astype(int).tolist(),
            "synapses": [
                [int(pre), int(post), float(w), float(d), "exc" if k else "inh"]
                for pre, post, w, d, k in zip(
                    self.syn_pre, self.syn_post, self.syn_weight,
                    self.syn_delay_ms, self.syn_kernel_exc)
            ],
            "input_map": [
                [int(c), int(t), float(w)]
                for c, t, w in zip(self.in_channel, self.in_target, self.in_weight)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ReservoirTopology":
        synapses = data["synapses"]
        input_map = data["input_map"]
        return cls(
            positions=np.asarray(data["positions"], dtype=np.int64),
            is_excitatory=np.asarray(data["is_excitatory"], dtype=bool),
            syn_pre=np.array([s[0] for s in synapses], dtype=np.int64),
            syn_post=np.array([s[1] for s in synapses], dtype=np.int64),
            syn_weight=np.array([s[2] for s in synapses], dtype=np.float64),
            syn_delay_ms=np.array([s[3] for s in synapses], dtype=np.float64),
            in_channel=np.array([e[0] for e in input_map], dtype=np.int64),
            in_target=np.array([e[1] for e in input_map], dtype=np.int64),
            in_weight=np.array([e[2] for e in input_map], dtype=np.float64),
            n_inputs=int(data["n_inputs"]),
        )


def save_topology_json(topology: ReservoirTopology, path) -> None:
    Path(path).write_text(json.dumps(topology.to_json_dict(), sort_keys=True))


def load_topology_json(path) -> ReservoirTopology:
    return ReservoirTopology.from_json_dict(json.loads(Path(path).read_text()))


def build_reservoir(config: ReservoirConfig, n_inputs: int) -> ReservoirTopology:
    """Draw a reservoir realization: labels, recurrent synapses, input map.

    Fully deterministic given ``config.seed``. Self-connections are excluded.
    Each input channel targets ``f_in`` distinct uniformly chosen neurons with
    weight +/- w_in decided by an independent fair coin per (channel, target).
    """
    n = config.n_neurons
    if n_inputs <= 0:
        raise ValueError("n_inputs must be positive")
    if config.f_in > n:
        raise ValueError("f_in exceeds the number of neurons")
    rng = np.random.default_rng(config.seed)

    nx, ny, nz = config.grid_dims
    positions = np.array(list(np.ndindex(nx, ny, nz)), dtype=np.int64)

    n_exc = int(round(config.f_plus * n))
    is_excitatory = np.zeros(n, dtype=bool)
    is_excitatory[rng.choice(n, size=n_exc, replace=False)] = True

    diff = positions[:, None, :] - positions[None, :, :]
    dist2 = np.sum(diff * diff, axis=-1).astype(np.float64)

    type_idx = (~is_excitatory).astype(np.int64)  # 0 = excitatory, 1 = inhibitory
    k_table = np.array([[config.k_ee, config.k_ei], [config.k_ie, config.k_ii]])
    w_table = np.array([[config.w_ee, config.w_ei], [config.w_ie, config.w_ii]])
    prob = k_table[type_idx[:, None], type_idx[None, :]] * np.exp(-dist2 / config.lam ** 2)
    np.fill_diagonal(prob, 0.0)

    connected = rng.random((n, n)) < prob
    pre, post = np.nonzero(connected)
    weight = config.alpha_w * w_table[type_idx[pre], type_idx[post]]

    in_channel = np.repeat(np.arange(n_inputs, dtype=np.int64), config.f_in)
    in_target = np.empty(n_inputs * config.f_in, dtype=np.int64)
    in_weight = np.empty(n_inputs * config.f_in, dtype=np.float64)
    for m in range(n_inputs):
        sl = slice(m * config.f_in, (m + 1) * config.f_in)
        in_target[sl] = rng.choice(n, size=config.f_in, replace=False)
        in_weight[sl] = np.where(rng.random(config.f_in) < 0.5, config.w_in, -config.w_in)

    return ReservoirTopology(
        positions=positions,
        is_excitatory=is_excitatory,
        syn_pre=pre.astype(np.int64),
        syn_post=post.astype(np.int64),
        syn_weight=weight,
        syn_delay_ms=np.full(pre.size, float(config.delay_ms)),
        in_channel=in_channel,
        in_target=in_target,
        in_weight=in_weight,
        n_inputs=n_inputs,
    )


def expected_synapse_count(config: ReservoirConfig) -> float:
    """Closed-form mean recurrent synapse count under the wiring rule.

    Averages the type-pair prefactor over the random excitatory/inhibitory
    label assignment (a uniform subset of round(f_plus * n) neurons), which is
    independent of the positions, then sums the distance kernel over ordered
    pairs.
    """
    n = config.n_neurons
    n_exc = int(round(config.f_plus * n))
    n_inh = n - n_exc
    pairs = n * (n - 1)
    p_ee = n_exc * (n_exc - 1) / pairs
    p_ei = n_exc * n_inh / pairs
    p_ie = n_inh * n_exc / pairs
    p_ii = n_inh * (n_inh - 1) / pairs
    k_mean = (p_ee * config.k_ee + p_ei * config.k_ei
              + p_ie * config.k_ie + p_ii * config.k_ii)

    nx, ny, nz = config.grid_dims
    positions = np.array(list(np.ndindex(nx, ny, nz)), dtype=np.float64)
    diff = positions[:, None, :] - positions[None, :, :]
    dist2 = np.sum(diff * diff, axis=-1)
    gauss = np.exp(-dist2 / config.lam ** 2)
    np.fill_diagonal(gauss, 0.0)
    return k_mean * float(gauss.sum())


def simulate(topology: ReservoirTopology, input_raster: SpikeRaster,
             config: ReservoirConfig) -> SpikeRaster:
    """Simulate the reservoir response to one input raster at 1 ms resolution.

    Forward Euler: V <- V * (1 - h/tau_mem) + h * I_syn, where I_syn sums the
    second-order kernel outputs of all afferent synapses. A neuron whose V
    exceeds v_th at the end of a step spikes at that step, resets to 0 and is
    clamped (ignoring input) for the next t_refrac ms. V is floored at 0.
    State starts from rest; spikes are delivered after the synaptic delay.
    """
    return simulate_batch(topology, [input_raster], config)[0]


def simulate_batch(topology: ReservoirTopology, rasters: list[SpikeRaster],
                   config: ReservoirConfig) -> list[SpikeRaster]:
    """Simulate many equal-length input rasters in one vectorized pass.

    Samples are independent (state resets at every sample start), so batching
    only amortizes the per-step cost; each output equals a standalone run.
    """
    if not rasters:
        return []
    duration = rasters[0].duration
    for r in rasters:
        if r.n_channels != topology.n_inputs:
            raise ValueError("input raster channel count does not match the input map")
        if r.duration != duration:
            raise ValueError("batched rasters must share a duration")

    h = TIME_STEP_MS
    n = topology.n_neurons
    n_batch = len(rasters)
    n_steps = int(duration)
    d_steps = int(round(config.delay_ms / h))
    t_rp_steps = int(round(config.t_refrac / h))

    w_exc, w_inh, w_input = topology._dense
    inv_e = 1.0 / (config.tau1_exc - config.tau2_exc)
    inv_i = 1.0 / (config.tau1_inh - config.tau2_inh)
    kernel_decay = np.exp(-h / np.array([config.tau1_exc, config.tau2_exc,
                                         config.tau1_inh, config.tau2_inh]))
    decay_mem = 1.0 - h / config.tau_mem

    # Input drive enters through the excitatory kernel; precompute it for all
    # steps and samples in one GEMM (scaled by the kernel normalization).
    u = np.stack([r.binned for r in rasters], axis=-1).astype(np.float64)  # (M, T, B)
    drive_in = (w_input @ u.reshape(topology.n_inputs, -1)).reshape(n, n_steps, n_batch)
    drive_in *= inv_e

    acc = np.zeros((4, n, n_batch))
    v = np.zeros((n, n_batch))
    ref = np.zeros((n, n_batch), dtype=np.int32)
    spikes = np.zeros((n_steps, n, n_batch), dtype=bool)

    for t in range(n_steps):
        acc *= kernel_decay[:, None, None]
        td = t - d_steps
        if td >= 0:
            s = spikes[td]
            if s.any():
                sf = s.astype(np.float64)
                add_e = w_exc @ sf
                add_e *= inv_e
                add_i = w_inh @ sf
                add_i *= inv_i
                acc[0] += add_e
                acc[1] += add_e
                acc[2] += add_i
                acc[3] += add_i
            acc[0] += drive_in[:, td]
            acc[1] += drive_in[:, td]
        i_syn = acc[0] - acc[1] + acc[2] - acc[3]

        inactive = ref > 0
        v *= decay_mem
        v += h * i_syn
        v[inactive] = 0.0
        np.maximum(v, 0.0, out=v)
        fired = v > config.v_th
        spikes[t] = fired
        v[fired] = 0.0
        ref[inactive] -= 1
        ref[fired] = t_rp_steps

    return [
        SpikeRaster.from_binned(spikes[:, :, b].T, duration=duration)
        for b in range(n_batch)
    ]


def kernel_response(delivered: np.ndarray, tau1: float, tau2: float,
                    h: float = TIME_STEP_MS) -> np.ndarray:
    """Second-order synapse output from per-step delivered spike weights.

    Reference form of the two-accumulator scheme used by the simulation
    loops: both accumulators gain weight/(tau1 - tau2) at delivery and decay
    with exp(-h/tau1) and exp(-h/tau2); the output is their difference. This
    equals the direct convolution of the delivered train with
    (exp(-t/tau1) - exp(-t/tau2)) / (tau1 - tau2) sampled on the step grid.
    """
    if not tau1 > tau2 > 0:
        raise ValueError("kernel needs tau1 > tau2 > 0")
    delivered = np.asarray(delivered, dtype=np.float64)
    d1 = math.exp(-h / tau1)
    d2 = math.exp(-h / tau2)
    inv = 1.0 / (tau1 - tau2)
    a1 = 0.0
    a2 = 0.0
    out = np.zeros(delivered.size)
    for k in range(delivered.size):
        a1 = a1 * d1 + delivered[k] * inv
        a2 = a2 * d2 + delivered[k] * inv
        out[k] = a1 - a2
    return out


def lif_trace(drive: np.ndarray, tau_mem: float, v_th: float, t_refrac: float,
              h: float = TIME_STEP_MS) -> tuple[np.ndarray, list[int]]:
    """Single-neuron reference form of the membrane update.

    ``drive[k]`` is the synaptic current at step k. Returns the post-update
    potential trace and the spike step indices. Used for discretization checks
    (e.g. halving h) where the full raster pipeline would be in the way.
    """
    drive = np.asarray(drive, dtype=np.float64)
    n_steps = drive.size
    t_rp_steps = int(round(t_refrac / h))
    decay = 1.0 - h / tau_mem
    v = 0.0
    ref = 0
    trace = np.zeros(n_steps)
    spike_steps: list[int] = []
    for k in range(n_steps):
        if ref > 0:
            ref -= 1
            trace[k] = 0.0
            continue
        v = max(v * decay + h * drive[k], 0.0)
        if v > v_th:
            spike_steps.append(k)
            v = 0.0
            ref = t_rp_steps
        trace[k] = v
    return trace, spike_steps
