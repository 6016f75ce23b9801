"""Spike rasters, windowed rate matrices, and the conversions between them.

Everything downstream (reservoir, readout, surrogate fitting) exchanges data
through the two containers defined here. Spike times live on a 1 ms integer
grid; rates are spikes/second averaged over a trailing rectangular window.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

TIME_STEP_MS = 1.0
RATE_WINDOW_MS = 50.0


@dataclass(frozen=True)
class SpikeRaster:
    """Timestamped spike events for a set of channels over one sample window.

    Events are stored as parallel ``channels``/``times`` arrays sorted by
    (time, channel), with integer times in ``[0, duration)`` on the 1 ms grid
    and no duplicate (channel, time) pairs.
    """

    n_channels: int
    duration: int  # ms
    channels: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        if self.n_channels <= 0:
            raise ValueError("raster needs at least one channel")
        if self.duration <= 0:
            raise ValueError("raster duration must be positive")
        ch = np.asarray(self.channels, dtype=np.int64)
        t = np.asarray(self.times, dtype=np.int64)
        if ch.shape != t.shape or ch.ndim != 1:
            raise ValueError("channels/times must be 1-D arrays of equal length")
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "times", t)
        if t.size:
            if t.min() < 0 or t.max() >= self.duration:
                raise ValueError("event times must lie in [0, duration)")
            if ch.min() < 0 or ch.max() >= self.n_channels:
                raise ValueError("event channels out of range")
            key = t * self.n_channels + ch
            if np.any(np.diff(key) <= 0):
                raise ValueError("events must be sorted by (time, channel) with no duplicates")

    @classmethod
    def from_events(cls, n_channels, duration, events):
        """Build a raster from an iterable of (channel, time) pairs, sorting and checking."""
        ev = sorted((int(t), int(c)) for c, t in events)
        times = np.array([t for t, _ in ev], dtype=np.int64)
        channels = np.array([c for _, c in ev], dtype=np.int64)
        return cls(n_channels=n_channels, duration=int(duration), channels=channels, times=times)

    @classmethod
    def from_binned(cls, grid, duration=None):
        """Build a raster from a boolean (n_channels, n_steps) spike grid."""
        grid = np.asarray(grid, dtype=bool)
        n_channels, n_steps = grid.shape
        times, channels = np.nonzero(grid.T)
        return cls(
            n_channels=n_channels,
            duration=int(duration if duration is not None else n_steps),
            channels=channels.astype(np.int64),
            times=times.astype(np.int64),
        )

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    @property
    def events(self) -> list[tuple[int, int]]:
        """Events as (channel, time) tuples in storage order."""
        return list(zip(self.channels.tolist(), self.times.tolist()))

    @cached_property
    def binned(self) -> np.ndarray:
        """Boolean (n_channels, duration) grid of spikes at 1 ms resolution."""
        grid = np.zeros((self.n_channels, self.duration), dtype=bool)
        grid[self.channels, self.times] = True
        return grid

    def mean_rate_hz(self) -> float:
        """Mean firing rate across all channels, in spikes/second."""
        return self.n_events / (self.n_channels * self.duration) * 1000.0


@dataclass(frozen=True)
class RateMatrix:
    """Per-unit instantaneous spike rates over discrete time.

    ``values`` is (n_units, n_steps) in spikes/second; ``step`` is the column
    stride in ms and ``window`` the averaging window in ms. Rates extracted
    from a raster satisfy 0 <= value <= 1000/step (at most one spike per grid
    step); surrogate-model predictions reuse this container without that
    physical-bound guarantee.
    """

    values: np.ndarray
    step: float  # ms
    window: float  # ms

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("rate values must be 2-D (n_units, n_steps)")
        object.__setattr__(self, "values", v)
        if self.step <= 0 or self.window <= 0:
            raise ValueError("step and window must be positive")

    @property
    def n_units(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]


def extract_rates(raster: SpikeRaster, window: float = RATE_WINDOW_MS,
                  step: float = TIME_STEP_MS) -> RateMatrix:
    """Windowed rate extraction: trailing rectangular window, stride = step.

    Column k holds, per channel, the spike count in the causal window
    (k*step - window, k*step] divided by the full window length, in
    spikes/second. Times before 0 contribute nothing, so early columns are
    zero-padded full-window averages.
    """
    if raster.n_channels == 0:
        raise ValueError("raster has no channels")
    w = _as_whole_ms(window, "window")
    s = _as_whole_ms(step, "step")
    if w % s != 0:
        raise ValueError("window must be a multiple of step")
    # cum[u, j] = number of spikes of channel u with time < j
    counts = np.zeros((raster.n_channels, raster.duration + 1), dtype=np.int64)
    np.add.at(counts, (raster.channels, raster.times + 1), 1)
    cum = np.cumsum(counts, axis=1)
    n_steps = raster.duration // s
    k_ms = np.arange(n_steps, dtype=np.int64) * s
    hi = k_ms + 1
    lo = np.maximum(k_ms - w + 1, 0)
    values = (cum[:, hi] - cum[:, lo]) * (1000.0 / w)
    return RateMatrix(values=values, step=float(s), window=float(w))


def concat_rasters(rasters: list[SpikeRaster]) -> tuple[SpikeRaster, list[float]]:
    """Concatenate rasters in time; returns the joined raster and sample start times (ms)."""
    if not rasters:
        raise ValueError("nothing to concatenate")
    n_channels = rasters[0].n_channels
    if any(r.n_channels != n_channels for r in rasters):
        raise ValueError("rasters disagree on channel count")
    boundaries: list[float] = []
    offset = 0
    shifted_times = []
    channels = []
    for r in rasters:
        boundaries.append(float(offset))
        shifted_times.append(r.times + offset)
        channels.append(r.channels)
        offset += r.duration
    return (
        SpikeRaster(
            n_channels=n_channels,
            duration=offset,
            channels=np.concatenate(channels),
            times=np.concatenate(shifted_times),
        ),
        boundaries,
    )


def concat_rates(mats: list[RateMatrix]) -> tuple[RateMatrix, list[float]]:
    """Column-concatenate per-sample rate matrices; returns start times (ms) per sample.

    Rates are extracted per sample before concatenation so no window straddles
    a sample boundary.
    """
    if not mats:
        raise ValueError("nothing to concatenate")
    first = mats[0]
    if any(m.n_units != first.n_units or m.step != first.step or m.window != first.window
           for m in mats):
        raise ValueError("rate matrices disagree on shape or grid")
    boundaries: list[float] = []
    offset = 0.0
    for m in mats:
        boundaries.append(offset)
        offset += m.n_steps * m.step
    values = np.hstack([m.values for m in mats])
    return RateMatrix(values=values, step=first.step, window=first.window), boundaries


def save_raster_csv(raster: SpikeRaster, path) -> None:
    """Write a raster as CSV: metadata comment line, header, one event per row."""
    lines = [f"# channels={raster.n_channels} duration_ms={raster.duration}", "channel,time_ms"]
    lines.extend(f"{c},{t}" for c, t in zip(raster.channels.tolist(), raster.times.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_raster_csv(path) -> SpikeRaster:
    text = Path(path).read_text().strip().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing raster metadata line")
    meta = dict(part.split("=") for part in text[0][1:].split())
    if text[1].strip() != "channel,time_ms":
        raise ValueError(f"{path}: unexpected header {text[1]!r}")
    channels = []
    times = []
    for line in text[2:]:
        if not line.strip():
            continue
        c, t = line.split(",")
        channels.append(int(c))
        times.append(int(t))
    return SpikeRaster(
        n_channels=int(meta["channels"]),
        duration=int(meta["duration_ms"]),
        channels=np.array(channels, dtype=np.int64),
        times=np.array(times, dtype=np.int64),
    )


def _as_whole_ms(value: float, name: str) -> int:
    if value <= 0:
        raise ValueError(f"{name} must be positive")
    if abs(value - round(value)) > 1e-9:
        raise ValueError(f"{name} must be a whole number of ms (grid is 1 ms)")
    return int(round(value))
