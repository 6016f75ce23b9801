from lsmlab.harness import ExperimentRecord


def make_record(**overrides) -> ExperimentRecord:
    """Synthetic record for report/CSV tests."""
    base = dict(
        alpha_w=1.0, lam=2.0, seed=0, folds=2, epochs=3,
        accuracy_per_epoch=[0.1, 0.2, 0.3], final_accuracy=0.25,
        mean_rate_hz=1.5, low_activity=False, tau_m_ms=5.0, mu=-0.2,
        clamped_modes=0, pcc_u_to_x=0.8, pcc_x_to_ro=0.9, pcc_u_to_ro=0.7,
        pcc_ro_to_x=0.4, pcc_x_to_u=0.5, pcc_ro_to_u=0.3,
        wall_clock_sim=1.0, wall_clock_metric=0.01,
    )
    base.update(overrides)
    return ExperimentRecord(**base)
