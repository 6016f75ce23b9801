"""End-to-end experiment orchestration: single points, sweeps, and reports.

A "point" is one (alpha_w, lam, seed) setting: build a reservoir, train the
readout with k-fold testing, then fit the linear surrogate on one
post-training sample per class and extract the memory metric, the divergence
exponent, and the transformation correlations. Sweeps iterate points over
parameter grids and write deterministic CSV/JSON outputs (timings go to a
separate file so result files are byte-reproducible).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from time import perf_counter

import numpy as np

from .dataset import LabeledDataset, kfold_split
from .readout import (ClassifierConfig, ReadoutState, accuracy_from_counts,
                      eval_counts_batch, run_readout_sample, train_pass)
from .reservoir import ReservoirConfig, build_reservoir, simulate_batch
from .spikes import (RATE_WINDOW_MS, TIME_STEP_MS, RateMatrix, SpikeRaster,
                     concat_rates, extract_rates)
from .statespace import (MetricReport, PCC_FIELDS, StateSpaceModel, TrajectorySet,
                         fit_ab, fit_w, lyapunov, memory_metric, pcc,
                         save_metric_report, transformation_suite)

LOW_ACTIVITY_RATE_HZ = 1.0


@dataclass(frozen=True)
class SweepConfig:
    alpha_w_values: tuple[float, ...]
    lambda_values: tuple[float, ...]
    structures_per_point: int = 4
    epochs: int = 20
    folds: int = 2
    accuracy_window: int = 5   # final accuracy = mean over this many last epochs
    seeds: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha_w_values", tuple(float(a) for a in self.alpha_w_values))
        object.__setattr__(self, "lambda_values", tuple(float(v) for v in self.lambda_values))
        if self.seeds is not None:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.alpha_w_values or not self.lambda_values:
            raise ValueError("sweep grids must be nonempty")
        if self.epochs > 0 and not 1 <= self.accuracy_window <= self.epochs:
            raise ValueError("accuracy_window must lie in [1, epochs]")

    @property
    def resolved_seeds(self) -> tuple[int, ...]:
        if self.seeds is not None:
            return self.seeds
        return tuple(range(self.structures_per_point))


@dataclass
class ExperimentRecord:
    """Everything measured at one sweep point."""

    alpha_w: float
    lam: float
    seed: int
    folds: int
    epochs: int
    accuracy_per_epoch: list[float]
    final_accuracy: float
    mean_rate_hz: float
    low_activity: bool
    tau_m_ms: float
    mu: float | None
    clamped_modes: int
    pcc_u_to_x: float | None
    pcc_x_to_ro: float | None
    pcc_u_to_ro: float | None
    pcc_ro_to_x: float | None
    pcc_x_to_u: float | None
    pcc_ro_to_u: float | None
    wall_clock_sim: float = 0.0
    wall_clock_metric: float = 0.0

    def metric_report(self) -> MetricReport:
        return MetricReport(
            tau_m_ms=self.tau_m_ms,
            mu=self.mu,
            clamped_modes=self.clamped_modes,
            **{name: getattr(self, name) for name in PCC_FIELDS},
        )


def run_point(res_cfg: ReservoirConfig, clf_cfg: ClassifierConfig,
              dataset: LabeledDataset, folds: int = 2, accuracy_window: int = 5,
              rate_window_ms: float = RATE_WINDOW_MS) -> ExperimentRecord:
    """Run one experiment point end to end.

    Trains the readout per fold (re-simulating the liquid every epoch, which
    is what the surrogate's speedup is measured against) and evaluates test
    accuracy per epoch. The surrogate is then fitted on one post-training test
    sample per class and scored on a second held-out sample per class.
    """
    if clf_cfg.n_classes != dataset.config.n_classes:
        raise ValueError("classifier and dataset disagree on the class count")
    seed = res_cfg.seed
    topology = build_reservoir(res_cfg, n_inputs=dataset.config.channels)
    splits = kfold_split(dataset, folds, seed)
    rasters = [s for s, _ in dataset.samples]
    labels = dataset.labels
    epochs = clf_cfg.epochs

    fold_curves: list[list[float]] = []
    eval_only_acc: list[float] = []
    fold0_weights: np.ndarray | None = None
    wall_clock_sim = 0.0
    for f, (train_idx, test_idx) in enumerate(splits):
        rng = np.random.default_rng([seed, 2, f])
        state = ReadoutState(clf_cfg.n_classes, topology.n_neurons)
        train_rasters = [rasters[i] for i in train_idx]
        train_labels = [int(labels[i]) for i in train_idx]
        test_rasters = [rasters[i] for i in test_idx]
        test_labels = labels[test_idx]
        started = perf_counter()
        curve: list[float] = []
        for _ in range(epochs):
            liquid = [r.binned for r in simulate_batch(topology, train_rasters, res_cfg)]
            train_pass(liquid, train_labels, state, res_cfg, clf_cfg, rng)
            liquid_test = [r.binned for r in simulate_batch(topology, test_rasters, res_cfg)]
            counts = eval_counts_batch(liquid_test, state.weights, res_cfg, clf_cfg)
            curve.append(accuracy_from_counts(counts, test_labels))
        if epochs == 0:
            liquid_test = [r.binned for r in simulate_batch(topology, test_rasters, res_cfg)]
            counts = eval_counts_batch(liquid_test, state.weights, res_cfg, clf_cfg)
            eval_only_acc.append(accuracy_from_counts(counts, test_labels))
        if f == 0:
            wall_clock_sim = perf_counter() - started
            fold0_weights = state.weights.copy()
        fold_curves.append(curve)

    if epochs > 0:
        accuracy_per_epoch = [float(np.mean([c[e] for c in fold_curves]))
                              for e in range(epochs)]
        window = min(accuracy_window, epochs)
        final_accuracy = float(np.mean(accuracy_per_epoch[-window:]))
    else:
        accuracy_per_epoch = []
        final_accuracy = float(np.mean(eval_only_acc))

    fit_idx, hold_idx = _per_class_sample_pairs(labels, splits[0][1], dataset.config.n_classes)

    # Surrogate extraction, timed: simulate the fit samples, window the rates,
    # fit (A, B), read the memory metric.
    started = perf_counter()
    fit_sims = simulate_batch(topology, [rasters[i] for i in fit_idx], res_cfg)
    x_fit_per = [extract_rates(r, rate_window_ms, TIME_STEP_MS) for r in fit_sims]
    u_fit_per = [extract_rates(rasters[i], rate_window_ms, TIME_STEP_MS) for i in fit_idx]
    x_fit, fit_bounds = concat_rates(x_fit_per)
    u_fit, _ = concat_rates(u_fit_per)
    a_mat, b_mat, diagnostics = fit_ab(x_fit, u_fit, fit_bounds)
    tau_m_ms, clamped_modes = memory_metric(a_mat, TIME_STEP_MS)
    wall_clock_metric = perf_counter() - started

    # Readout rates, held-out correlations, and the divergence exponent.
    hold_sims = simulate_batch(topology, [rasters[i] for i in hold_idx], res_cfg)
    x_hold_per = [extract_rates(r, rate_window_ms, TIME_STEP_MS) for r in hold_sims]
    u_hold_per = [extract_rates(rasters[i], rate_window_ms, TIME_STEP_MS) for i in hold_idx]
    ro_fit_per = _readout_rates(fit_sims, fold0_weights, res_cfg, clf_cfg, rate_window_ms)
    ro_hold_per = _readout_rates(hold_sims, fold0_weights, res_cfg, clf_cfg, rate_window_ms)

    x_hold, hold_bounds = concat_rates(x_hold_per)
    u_hold, _ = concat_rates(u_hold_per)
    ro_fit, _ = concat_rates(ro_fit_per)
    ro_hold, _ = concat_rates(ro_hold_per)
    model = StateSpaceModel(a=a_mat, b=b_mat, w=fit_w(x_fit, ro_fit),
                            step_ms=TIME_STEP_MS, diagnostics=diagnostics)
    suite = transformation_suite(
        TrajectorySet(u=u_fit, x=x_fit, ro=ro_fit, boundaries=tuple(fit_bounds)),
        TrajectorySet(u=u_hold, x=x_hold, ro=ro_hold, boundaries=tuple(hold_bounds)),
        model=model,
    )
    divergence = lyapunov([
        (u_fit_per[c], u_hold_per[c], x_fit_per[c], x_hold_per[c])
        for c in range(dataset.config.n_classes)
    ])
    mean_rate = float(np.mean([r.mean_rate_hz() for r in fit_sims]))

    return ExperimentRecord(
        alpha_w=res_cfg.alpha_w,
        lam=res_cfg.lam,
        seed=seed,
        folds=folds,
        epochs=epochs,
        accuracy_per_epoch=accuracy_per_epoch,
        final_accuracy=final_accuracy,
        mean_rate_hz=mean_rate,
        low_activity=mean_rate < LOW_ACTIVITY_RATE_HZ,
        tau_m_ms=tau_m_ms,
        mu=divergence.mu,
        clamped_modes=clamped_modes,
        wall_clock_sim=wall_clock_sim,
        wall_clock_metric=wall_clock_metric,
        **suite,
    )


def _per_class_sample_pairs(labels: np.ndarray, test_idx: np.ndarray,
                            n_classes: int) -> tuple[list[int], list[int]]:
    """First and second test-fold sample index of every class (fit vs holdout)."""
    fit_idx = []
    hold_idx = []
    for c in range(n_classes):
        of_class = [int(i) for i in test_idx if labels[i] == c]
        if len(of_class) < 2:
            raise ValueError(
                f"class {c} needs at least 2 test-fold samples for fit + holdout")
        fit_idx.append(of_class[0])
        hold_idx.append(of_class[1])
    return fit_idx, hold_idx


def _readout_rates(sims, weights, res_cfg, clf_cfg, rate_window_ms) -> list[RateMatrix]:
    """Frozen readout spike rates for each simulated sample."""
    state = ReadoutState(clf_cfg.n_classes, weights.shape[1])
    out = []
    for sim in sims:
        state.weights = weights  # frozen pass never writes
        _, grid = run_readout_sample(sim.binned, state, res_cfg, clf_cfg,
                                     record_spikes=True)
        raster = SpikeRaster.from_binned(grid, duration=sim.duration)
        out.append(extract_rates(raster, rate_window_ms, TIME_STEP_MS))
    return out


def _point_task(args):
    res_cfg, clf_cfg, dataset, folds, accuracy_window = args
    return run_point(res_cfg, clf_cfg, dataset, folds, accuracy_window)


def run_sweep(dataset: LabeledDataset, sweep: SweepConfig,
              res_cfg: ReservoirConfig | None = None,
              clf_cfg: ClassifierConfig | None = None,
              out_dir=None, n_workers: int = 1) -> list[ExperimentRecord]:
    """Run every (alpha_w, lam, seed) point of the sweep grid.

    Points are independent and may run in a process pool; results are merged
    in (alpha_w, lam, seed) order so reruns produce identical files.
    """
    res_cfg = res_cfg or ReservoirConfig()
    clf_cfg = clf_cfg or ClassifierConfig()
    clf_cfg = replace(clf_cfg, epochs=sweep.epochs,
                      n_classes=dataset.config.n_classes)
    points = sorted(
        (alpha, lam, seed)
        for alpha in sweep.alpha_w_values
        for lam in sweep.lambda_values
        for seed in sweep.resolved_seeds
    )
    tasks = [
        (res_cfg.with_updates(alpha_w=alpha, lam=lam, seed=seed), clf_cfg,
         dataset, sweep.folds, sweep.accuracy_window)
        for alpha, lam, seed in points
    ]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_point_task, tasks))
    else:
        records = [_point_task(t) for t in tasks]
    records.sort(key=lambda r: (r.alpha_w, r.lam, r.seed))
    if out_dir is not None:
        write_sweep_outputs(records, out_dir,
                            grid=(len(sweep.alpha_w_values) > 1 and len(sweep.lambda_values) > 1))
    return records


def activity_sweep(alpha_w_values, lam: float, dataset: LabeledDataset,
                   res_cfg: ReservoirConfig | None = None,
                   clf_cfg: ClassifierConfig | None = None,
                   seeds=(0,), epochs: int = 20, folds: int = 2,
                   accuracy_window: int = 5, out_dir=None,
                   n_workers: int = 1) -> list[ExperimentRecord]:
    """Sweep the synaptic scaling at fixed connectivity distance."""
    if not len(alpha_w_values):
        raise ValueError("alpha_w_values must be nonempty")
    sweep = SweepConfig(alpha_w_values=tuple(alpha_w_values), lambda_values=(lam,),
                        epochs=epochs, folds=folds, accuracy_window=accuracy_window,
                        seeds=tuple(seeds))
    return run_sweep(dataset, sweep, res_cfg, clf_cfg, out_dir, n_workers)


def design_space_grid(alpha_w_values, lambda_values, dataset: LabeledDataset,
                      res_cfg: ReservoirConfig | None = None,
                      clf_cfg: ClassifierConfig | None = None,
                      seeds=(0,), epochs: int = 20, folds: int = 2,
                      accuracy_window: int = 5, out_dir=None,
                      n_workers: int = 1) -> list[ExperimentRecord]:
    """Full (alpha_w, lam) grid; emits accuracy/memory/divergence grid CSVs."""
    if len(alpha_w_values) < 2 or len(lambda_values) < 2:
        raise ValueError("design-space grid needs at least 2x2 points")
    sweep = SweepConfig(alpha_w_values=tuple(alpha_w_values),
                        lambda_values=tuple(lambda_values),
                        epochs=epochs, folds=folds, accuracy_window=accuracy_window,
                        seeds=tuple(seeds))
    return run_sweep(dataset, sweep, res_cfg, clf_cfg, out_dir, n_workers)


def summarize_activity(records: list[ExperimentRecord]) -> list[dict]:
    """Per-alpha mean and one-sigma spread over seeds (accuracy, memory, rate)."""
    rows = []
    for alpha in sorted({r.alpha_w for r in records}):
        group = [r for r in records if r.alpha_w == alpha]
        accs = np.array([r.final_accuracy for r in group])
        taus = np.array([r.tau_m_ms for r in group])
        rates = np.array([r.mean_rate_hz for r in group])
        rows.append({
            "alpha_w": alpha,
            "n": len(group),
            "accuracy_mean": float(accs.mean()),
            "accuracy_sd": float(accs.std()),
            "tau_m_ms_mean": float(taus.mean()),
            "tau_m_ms_sd": float(taus.std()),
            "mean_rate_hz_mean": float(rates.mean()),
            "mean_rate_hz_sd": float(rates.std()),
        })
    return rows


def epochs_to_accuracy(records: list[ExperimentRecord],
                       target_accuracy: float) -> list[tuple[float, int | None]]:
    """(tau_m_ms, first 1-based epoch reaching the target) per record; None if never."""
    out = []
    for r in records:
        reached = None
        for e, acc in enumerate(r.accuracy_per_epoch):
            if acc >= target_accuracy:
                reached = e + 1
                break
        out.append((r.tau_m_ms, reached))
    return out


def correlation_report(records: list[ExperimentRecord],
                       accuracy_floor: float = 0.85) -> dict:
    """Correlation of the surrogate metrics with final accuracy.

    Reports the Pearson correlation of tau_M and of the divergence exponent
    against final accuracy, overall and restricted to records at or above the
    accuracy floor. Degenerate cases carry an explicit null with a reason.
    """
    if len(records) < 3:
        raise ValueError("correlation report needs at least 3 records")

    def block(group: list[ExperimentRecord]) -> dict:
        out: dict = {"n": len(group)}
        accs = np.array([r.final_accuracy for r in group])
        taus = np.array([r.tau_m_ms for r in group])
        with_mu = [r for r in group if r.mu is not None]
        out["pcc_tau_m_accuracy"], out["tau_m_note"] = _safe_pcc(taus, accs)
        mus = np.array([r.mu for r in with_mu])
        mu_accs = np.array([r.final_accuracy for r in with_mu])
        out["n_with_mu"] = len(with_mu)
        out["pcc_mu_accuracy"], out["mu_note"] = _safe_pcc(mus, mu_accs)
        return out

    high = [r for r in records if r.final_accuracy >= accuracy_floor]
    return {
        "n_records": len(records),
        "accuracy_floor": accuracy_floor,
        "overall": block(records),
        "high_performance": block(high) if high else {"n": 0},
    }


def _safe_pcc(a: np.ndarray, b: np.ndarray) -> tuple[float | None, str | None]:
    if a.size < 2:
        return None, "fewer than 2 records"
    value = pcc(a, b)
    if value is None:
        return None, "zero variance"
    return value, None


# ---------------------------------------------------------------------------
# File outputs
# ---------------------------------------------------------------------------

RECORD_COLUMNS = (
    "alpha_w", "lambda", "seed", "folds", "epochs", "final_accuracy",
    "mean_rate_hz", "low_activity", "tau_m_ms", "mu", "clamped_modes",
    "pcc_u_to_x", "pcc_x_to_ro", "pcc_u_to_ro", "pcc_ro_to_x", "pcc_x_to_u",
    "pcc_ro_to_u", "accuracy_per_epoch",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(records: list[ExperimentRecord], path) -> None:
    lines = [",".join(RECORD_COLUMNS)]
    for r in records:
        row = [
            _fmt(r.alpha_w), _fmt(r.lam), _fmt(r.seed), _fmt(r.folds), _fmt(r.epochs),
            _fmt(r.final_accuracy), _fmt(r.mean_rate_hz), _fmt(r.low_activity),
            _fmt(r.tau_m_ms), _fmt(r.mu), _fmt(r.clamped_modes),
            _fmt(r.pcc_u_to_x), _fmt(r.pcc_x_to_ro), _fmt(r.pcc_u_to_ro),
            _fmt(r.pcc_ro_to_x), _fmt(r.pcc_x_to_u), _fmt(r.pcc_ro_to_u),
            ";".join(repr(a) for a in r.accuracy_per_epoch),
        ]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_records_csv(path) -> list[ExperimentRecord]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != ",".join(RECORD_COLUMNS):
        raise ValueError(f"{path}: unexpected records header")
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        vals = dict(zip(RECORD_COLUMNS, parts))
        records.append(ExperimentRecord(
            alpha_w=float(vals["alpha_w"]),
            lam=float(vals["lambda"]),
            seed=int(vals["seed"]),
            folds=int(vals["folds"]),
            epochs=int(vals["epochs"]),
            accuracy_per_epoch=[float(v) for v in vals["accuracy_per_epoch"].split(";") if v],
            final_accuracy=float(vals["final_accuracy"]),
            mean_rate_hz=float(vals["mean_rate_hz"]),
            low_activity=vals["low_activity"] == "1",
            tau_m_ms=float(vals["tau_m_ms"]),
            mu=float(vals["mu"]) if vals["mu"] else None,
            clamped_modes=int(vals["clamped_modes"]),
            pcc_u_to_x=_parse_opt(vals["pcc_u_to_x"]),
            pcc_x_to_ro=_parse_opt(vals["pcc_x_to_ro"]),
            pcc_u_to_ro=_parse_opt(vals["pcc_u_to_ro"]),
            pcc_ro_to_x=_parse_opt(vals["pcc_ro_to_x"]),
            pcc_x_to_u=_parse_opt(vals["pcc_x_to_u"]),
            pcc_ro_to_u=_parse_opt(vals["pcc_ro_to_u"]),
        ))
    return records


def _parse_opt(text: str) -> float | None:
    return float(text) if text else None


def write_timings_csv(records: list[ExperimentRecord], path) -> None:
    lines = ["alpha_w,lambda,seed,wall_clock_sim,wall_clock_metric"]
    for r in records:
        lines.append(",".join([
            _fmt(r.alpha_w), _fmt(r.lam), _fmt(r.seed),
            repr(r.wall_clock_sim), repr(r.wall_clock_metric),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def point_tag(record: ExperimentRecord) -> str:
    return f"alpha{record.alpha_w:g}_lam{record.lam:g}_seed{record.seed}"


def write_sweep_outputs(records: list[ExperimentRecord], out_dir, grid: bool = False) -> Path:
    """records.csv + timings.csv + per-point metrics.json (+ grid CSVs)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out / "records.csv")
    write_timings_csv(records, out / "timings.csv")
    points = out / "points"
    points.mkdir(exist_ok=True)
    for r in records:
        save_metric_report(r.metric_report(), points / f"{point_tag(r)}_metrics.json")
    if grid:
        write_grid_csvs(records, out)
    return out


def write_grid_csvs(records: list[ExperimentRecord], out_dir) -> None:
    """Three (lambda x alpha_w) grids averaged over seeds: accuracy, tau_M, mu."""
    out = Path(out_dir)
    alphas = sorted({r.alpha_w for r in records})
    lams = sorted({r.lam for r in records})

    def cell(lam, alpha, getter):
        vals = [getter(r) for r in records if r.lam == lam and r.alpha_w == alpha]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    for name, getter in (
        ("accuracy_grid.csv", lambda r: r.final_accuracy),
        ("tau_m_grid.csv", lambda r: r.tau_m_ms),
        ("mu_grid.csv", lambda r: r.mu),
    ):
        lines = ["lambda\\alpha_w," + ",".join(_fmt(a) for a in alphas)]
        for lam in lams:
            row = [_fmt(lam)] + [_fmt(cell(lam, a, getter)) for a in alphas]
            lines.append(",".join(row))
        (out / name).write_text("\n".join(lines) + "\n")


def write_report_json(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, sort_keys=True, indent=2))
