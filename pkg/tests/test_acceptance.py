"""Acceptance suite: one test per acceptance criterion, in order.

Each test prints a single [PASS]/[FAIL] line (visible with `pytest -s` or in
the captured output of failures). Desk-scale protocol: 10 classes x 20
samples of the jittered-Poisson dataset, 5x5x5 reservoir at the standard
defaults, 20 epochs, 2-fold testing, accuracy averaged over the last 5
epochs, 3 structure seeds. The three sweeps are module-scoped fixtures shared
by the criteria that need them.
"""

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from lsmlab.dataset import DatasetConfig, generate_dataset
from lsmlab.harness import (activity_sweep, correlation_report, design_space_grid,
                            epochs_to_accuracy, summarize_activity)
from lsmlab.readout import ClassifierConfig, baseline_reservoirless, calcium_update
from lsmlab.reservoir import kernel_response
from lsmlab.statespace import StateSpaceModel, fit_ab, pcc, pinv, predict

DATASET_SEED = 7
STRUCTURE_SEEDS = (0, 1, 2)
EPOCHS = 20
FOLDS = 2
ACCURACY_WINDOW = 5
TARGET_ACCURACY = 0.80
ACCURACY_FLOOR = 0.85


def report(criterion, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


@dataclass
class SweepResult:
    records: list
    elapsed_s: float


@pytest.fixture(scope="module")
def desk_dataset():
    return generate_dataset(DatasetConfig(samples_per_class=20, seed=DATASET_SEED))


@pytest.fixture(scope="module")
def activity_records(desk_dataset):
    """Criterion 5 protocol: alpha_w in {0.5, 0.8, 2, 5} at lambda = 2."""
    started = time.perf_counter()
    records = activity_sweep([0.5, 0.8, 2.0, 5.0], 2.0, desk_dataset,
                             seeds=STRUCTURE_SEEDS, epochs=EPOCHS, folds=FOLDS,
                             accuracy_window=ACCURACY_WINDOW)
    return SweepResult(records, time.perf_counter() - started)


@pytest.fixture(scope="module")
def sweep_records(desk_dataset):
    """Criterion 6 protocol: 12-point alpha_w sweep spanning 0.1-4, 3 seeds."""
    alphas = [0.1, 0.5, 0.8, 1.2, 1.5, 1.8, 2.2, 2.5, 2.8, 3.2, 3.6, 4.0]
    started = time.perf_counter()
    records = activity_sweep(alphas, 2.0, desk_dataset, seeds=STRUCTURE_SEEDS,
                             epochs=EPOCHS, folds=FOLDS,
                             accuracy_window=ACCURACY_WINDOW)
    return SweepResult(records, time.perf_counter() - started)


@pytest.fixture(scope="module")
def grid_records(desk_dataset):
    """Criterion 7 protocol: reduced 5x5 (alpha_w, lambda) grid."""
    started = time.perf_counter()
    records = design_space_grid(
        [0.5, 1.375, 2.25, 3.125, 4.0], [1.0, 1.75, 2.5, 3.25, 4.0],
        desk_dataset, seeds=(0,), epochs=EPOCHS, folds=FOLDS,
        accuracy_window=ACCURACY_WINDOW)
    return SweepResult(records, time.perf_counter() - started)


class TestCriterion1:
    def test_pinv_penrose_conditions(self):
        rng = np.random.default_rng(1001)
        shapes = [(60, 40), (40, 60), (30, 30), (50, 20), (20, 50)]
        worst = 0.0
        started = time.perf_counter()
        for i in range(50):
            p, q = shapes[i % len(shapes)]
            if i % 2 == 0:
                m = rng.normal(size=(p, q))
            else:
                rank = rng.integers(1, min(p, q) // 2 + 1)
                m = rng.normal(size=(p, rank)) @ rng.normal(size=(rank, q))
            m_pinv = pinv(m)
            worst = max(
                worst,
                np.linalg.norm(m @ m_pinv @ m - m),
                np.linalg.norm(m_pinv @ m @ m_pinv - m_pinv),
                np.linalg.norm((m @ m_pinv).T - m @ m_pinv),
                np.linalg.norm((m_pinv @ m).T - m_pinv @ m),
            )
        elapsed = time.perf_counter() - started
        report(1, worst < 1e-8 and elapsed < 1.0,
               f"worst Penrose residual {worst:.2e} over 50 matrices in {elapsed:.2f}s")


class TestCriterion2:
    def test_system_identification_recovery(self):
        rng = np.random.default_rng(2002)
        n, m, t = 20, 5, 2000
        raw = rng.normal(size=(n, n))
        a_true = raw * (0.9 / np.max(np.abs(np.linalg.eigvals(raw))))
        b_true = rng.normal(size=(n, m))
        u = rng.normal(size=(m, t))
        x = np.zeros((n, t))
        x[:, 0] = rng.normal(size=n)
        for k in range(t - 1):
            x[:, k + 1] = a_true @ x[:, k] + b_true @ u[:, k]

        from lsmlab.spikes import RateMatrix
        xm = RateMatrix(values=x, step=1.0, window=50.0)
        um = RateMatrix(values=u, step=1.0, window=50.0)
        started = time.perf_counter()
        a_fit, b_fit, _ = fit_ab(xm, um, [0.0])
        model = StateSpaceModel(a=a_fit, b=b_fit, w=None, step_ms=1.0)
        est = predict(model, um, x[:, 0], [0.0])
        elapsed = time.perf_counter() - started

        err_a = np.linalg.norm(a_fit - a_true) / np.linalg.norm(a_true)
        err_b = np.linalg.norm(b_fit - b_true) / np.linalg.norm(b_true)
        err_x = np.linalg.norm(est.values - x) / np.linalg.norm(x)
        report(2, err_a < 1e-6 and err_b < 1e-6 and err_x < 1e-6 and elapsed < 5.0,
               f"rel errors A {err_a:.2e}, B {err_b:.2e}, X {err_x:.2e} in {elapsed:.2f}s")


class TestCriterion3:
    def test_kernel_accumulator_equals_convolution(self):
        rng = np.random.default_rng(3003)
        worst = 0.0
        for tau1, tau2 in ((8.0, 4.0), (4.0, 2.0)):
            for _ in range(5):
                delivered = np.where(rng.random(500) < 0.08,
                                     rng.uniform(-8.0, 8.0, size=500), 0.0)
                out = kernel_response(delivered, tau1, tau2)
                t = np.arange(500, dtype=np.float64)
                direct = np.zeros(500)
                for s in np.flatnonzero(delivered):
                    tail = t[s:] - s
                    direct[s:] += delivered[s] * (
                        np.exp(-tail / tau1) - np.exp(-tail / tau2)) / (tau1 - tau2)
                worst = max(worst, np.max(np.abs(out - direct)))
        report(3, worst < 1e-9, f"max |accumulator - convolution| = {worst:.2e}")


class TestCriterion4:
    def test_calcium_steady_state(self):
        tau_ca = 64.0
        period = 128
        c = 0.0
        observed = None
        for _ in range(20):
            for _ in range(period):
                c = calcium_update(c, False, h=1.0, tau_ca=tau_ca)
            observed = c
            c += 1.0
        expected = 1.0 / (np.exp(period / tau_ca) - 1.0)
        err = abs(observed - expected)
        report(4, err < 1e-9,
               f"periodic driving T_s={period} ms: |c - {expected:.6f}| = {err:.2e} "
               f"after 20 periods")


class TestCriterion5:
    def test_activity_study(self, activity_records):
        rows = summarize_activity(activity_records.records)
        rates = [row["mean_rate_hz_mean"] for row in rows]
        errors = [1.0 - row["accuracy_mean"] for row in rows]
        taus = [row["tau_m_ms_mean"] for row in rows]

        monotone = all(a < b for a, b in zip(rates, rates[1:]))
        err_idx = int(np.argmin(errors))
        err_interior = 0 < err_idx < len(errors) - 1 and \
            errors[err_idx] < min(errors[0], errors[-1])
        tau_idx = int(np.argmax(taus))
        tau_interior = 0 < tau_idx < len(taus) - 1 and \
            taus[tau_idx] > max(taus[0], taus[-1])
        in_time = activity_records.elapsed_s < 1800.0

        report(5, monotone and err_interior and tau_interior and in_time,
               f"rates {[f'{r:.2f}' for r in rates]} monotone={monotone}; "
               f"errors {[f'{e:.3f}' for e in errors]} interior-min={err_interior}; "
               f"tau {[f'{t:.2f}' for t in taus]} interior-max={tau_interior}; "
               f"elapsed {activity_records.elapsed_s:.0f}s")


class TestCriterion6:
    def test_memory_metric_beats_divergence(self, sweep_records):
        rep = correlation_report(sweep_records.records, accuracy_floor=ACCURACY_FLOOR)
        tau_pcc = rep["overall"]["pcc_tau_m_accuracy"]
        mu_pcc = rep["overall"]["pcc_mu_accuracy"]
        ok = (tau_pcc is not None and mu_pcc is not None
              and tau_pcc >= 0.6 and tau_pcc >= mu_pcc + 0.2)
        report(6, ok,
               f"PCC(tau_M, acc) = {tau_pcc}, PCC(mu, acc) = {mu_pcc} over "
               f"{rep['n_records']} records (need tau >= 0.6 and tau >= mu + 0.2)")


class TestCriterion7:
    def test_design_space_grid(self, grid_records):
        records = grid_records.records
        high = [r for r in records if r.final_accuracy > ACCURACY_FLOOR]
        subset_name = f"accuracy > {ACCURACY_FLOOR}"
        if not high:
            cut = np.quantile([r.final_accuracy for r in records], 0.75)
            high = [r for r in records if r.final_accuracy >= cut]
            subset_name = f"top quartile (accuracy >= {cut:.3f})"
        accs = np.array([r.final_accuracy for r in high])
        taus = np.array([r.tau_m_ms for r in high])
        mus = np.array([r.mu for r in high if r.mu is not None])
        mu_accs = np.array([r.final_accuracy for r in high if r.mu is not None])
        tau_pcc = pcc(taus, accs)
        mu_pcc = pcc(mus, mu_accs) if mus.size >= 2 else None
        ok = (tau_pcc is not None and mu_pcc is not None and tau_pcc > mu_pcc
              and grid_records.elapsed_s < 7200.0)
        report(7, ok,
               f"{subset_name}, n={len(high)}: PCC(tau_M, acc) = {tau_pcc}, "
               f"PCC(mu, acc) = {mu_pcc}; elapsed {grid_records.elapsed_s:.0f}s")


class TestCriterion8:
    def test_forward_vs_reverse_at_best_point(self, sweep_records):
        best = max(sweep_records.records, key=lambda r: r.final_accuracy)
        forward = [best.pcc_u_to_x, best.pcc_x_to_ro, best.pcc_u_to_ro]
        reverse = [best.pcc_ro_to_x, best.pcc_x_to_u, best.pcc_ro_to_u]
        defined = all(v is not None for v in forward + reverse)
        fwd_mean = np.mean(forward) if defined else None
        rev_mean = np.mean(reverse) if defined else None
        ok = (defined and fwd_mean > rev_mean
              and best.pcc_u_to_x is not None and best.pcc_u_to_x >= 0.8)
        report(8, ok,
               f"best point (alpha_w={best.alpha_w}, seed={best.seed}, "
               f"acc={best.final_accuracy:.3f}): forward mean {fwd_mean}, "
               f"reverse mean {rev_mean}, u_to_x {best.pcc_u_to_x}")


class TestCriterion9:
    def test_metric_extraction_speedup(self, sweep_records):
        ratios = [r.wall_clock_sim / r.wall_clock_metric
                  for r in sweep_records.records if r.wall_clock_metric > 0]
        median_ratio = float(np.median(ratios))
        report(9, median_ratio >= 100.0,
               f"median training/extraction wall-clock ratio {median_ratio:.0f}x "
               f"over {len(ratios)} points (need >= 100x)")


class TestCriterion10:
    def test_epochs_to_target_vs_memory(self, sweep_records):
        pairs = epochs_to_accuracy(sweep_records.records, TARGET_ACCURACY)
        reached = [(tau, ep) for tau, ep in pairs if ep is not None]
        if len(reached) < 2:
            report(10, False,
                   f"only {len(reached)} of {len(pairs)} records reach "
                   f"{TARGET_ACCURACY:.0%} accuracy; Spearman undefined")
            return
        taus = [tau for tau, _ in reached]
        epochs_needed = [ep for _, ep in reached]
        rho = spearmanr(taus, epochs_needed).statistic
        report(10, rho < 0,
               f"Spearman(tau_M, epochs to {TARGET_ACCURACY:.0%}) = {rho:.3f} "
               f"over {len(reached)} records")


class TestCriterion11:
    def test_full_scale_accuracy_documented_as_reference_only(self):
        readme = Path(__file__).resolve().parents[1] / "README.md"
        text = readme.read_text()
        ok = "99.09" in text and "not reproduc" in text.lower()
        report(11, ok,
               "README documents the full-scale speech benchmark accuracy "
               "(99.09%) as a non-reproducible reference")


class TestSupplementary:
    """Directional spec examples that need the sweep data (not gate criteria)."""

    def test_reservoir_beats_baseline_at_optimum(self, sweep_records, desk_dataset):
        clf = ClassifierConfig(epochs=EPOCHS)
        baseline_acc, _ = baseline_reservoirless(desk_dataset, clf, folds=FOLDS,
                                                 seed=0, epochs=EPOCHS)
        best = max(r.final_accuracy for r in sweep_records.records)
        print(f"[AUX] best reservoir accuracy {best:.3f} vs baseline {baseline_acc:.3f}")
        assert best >= baseline_acc

    def test_training_exceeds_chance_somewhere(self, sweep_records):
        best = max(r.final_accuracy for r in sweep_records.records)
        print(f"[AUX] best sweep accuracy {best:.3f} vs chance 0.1")
        assert best > 0.1

    def test_divergence_trend_with_scaling(self, sweep_records):
        rows = {}
        for r in sweep_records.records:
            if r.mu is not None:
                rows.setdefault(r.alpha_w, []).append(r.mu)
        alphas = sorted(rows)
        means = [float(np.mean(rows[a])) for a in alphas]
        rho = spearmanr(alphas, means).statistic
        print(f"[AUX] Spearman(alpha_w, mean mu) = {rho:.3f}")
        assert rho > 0.8

    def test_chained_forward_not_above_stages(self, sweep_records):
        # not a theorem, so checked directionally: on average the chained
        # estimate should not beat its stages beyond desk-scale noise
        gaps = []
        for r in sweep_records.records:
            stages = (r.pcc_u_to_x, r.pcc_x_to_ro, r.pcc_u_to_ro)
            if all(v is not None for v in stages):
                gaps.append(r.pcc_u_to_ro - min(r.pcc_u_to_x, r.pcc_x_to_ro))
        print(f"[AUX] mean(chained - min stage) = {np.mean(gaps):.3f} over {len(gaps)}")
        assert np.mean(gaps) <= 0.05

    def test_readout_map_stronger_than_inverse(self, sweep_records):
        fwd = [r.pcc_x_to_ro for r in sweep_records.records if r.pcc_x_to_ro is not None]
        rev = [r.pcc_ro_to_x for r in sweep_records.records if r.pcc_ro_to_x is not None]
        print(f"[AUX] mean X->Ro PCC {np.mean(fwd):.3f} vs mean Ro->X PCC {np.mean(rev):.3f}")
        assert np.mean(fwd) > np.mean(rev)

    def test_every_record_has_valid_metrics(self, sweep_records):
        for r in sweep_records.records:
            assert r.tau_m_ms >= 1.0
            assert r.mu is None or np.isfinite(r.mu)
