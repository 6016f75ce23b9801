"""Discrete linear surrogate fitting and the metrics read off from it.

The surrogate is x[k+1] = A x[k] + B u[k] with a memoryless readout
ro[k] = W x[k], fitted from rate trajectories by least squares through an
SVD-based Moore-Penrose pseudoinverse. From the fitted A we read a memory
timescale (mean of h / (1 - |a_i|) over the diagonal); a chaos measure
compares response divergence to input divergence for same-class sample pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spikes import RateMatrix

MEMORY_CLAMP_EPS = 1e-3


def pinv(mtx: np.ndarray, rcond: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below rcond * sigma_max are discarded; the default rcond
    is max(p, q) * machine epsilon for a p x q input.
    """
    inverse, _ = _pinv_with_rank(mtx, rcond)
    return inverse


def _pinv_with_rank(mtx: np.ndarray, rcond: float | None = None) -> tuple[np.ndarray, int]:
    mtx = np.asarray(mtx, dtype=np.float64)
    if mtx.ndim != 2:
        raise ValueError("pinv expects a 2-D matrix")
    if not np.all(np.isfinite(mtx)):
        raise ValueError("pinv requires finite entries")
    if rcond is None:
        rcond = max(mtx.shape) * np.finfo(np.float64).eps
    u, s, vt = np.linalg.svd(mtx, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((mtx.shape[1], mtx.shape[0])), 0
    cutoff = rcond * s[0]
    keep = s > cutoff
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T, int(np.count_nonzero(keep))


@dataclass(frozen=True)
class FitDiagnostics:
    residual: float        # Frobenius norm of the one-step prediction error
    rank_used: int         # effective rank of the regressor matrix
    n_columns: int         # regression columns after boundary exclusion
    underdetermined: bool


@dataclass(frozen=True)
class StateSpaceModel:
    a: np.ndarray                  # (N, N) state transition
    b: np.ndarray                  # (N, M) input mapping
    w: np.ndarray | None           # (L, N) readout map, optional
    step_ms: float
    diagnostics: FitDiagnostics | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("A must be square")
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise ValueError("B must have as many rows as A")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.w is not None:
            w = np.asarray(self.w, dtype=np.float64)
            if w.ndim != 2 or w.shape[1] != a.shape[0]:
                raise ValueError("W must have as many columns as A")
            object.__setattr__(self, "w", w)

    @property
    def n_state(self) -> int:
        return self.a.shape[0]


def _boundary_columns(boundaries, step: float, n_steps: int) -> np.ndarray:
    cols = np.array(sorted(round(b / step) for b in boundaries), dtype=np.int64)
    if cols.size == 0 or cols[0] != 0:
        raise ValueError("boundaries must start at 0")
    if np.any(cols < 0) or np.any(cols >= n_steps):
        raise ValueError("boundary outside the trajectory")
    return cols


def transition_columns(boundaries, step: float, n_steps: int) -> np.ndarray:
    """Column indices k such that k and k+1 belong to the same sample."""
    starts = _boundary_columns(boundaries, step, n_steps)
    ends = np.append(starts[1:], n_steps)
    keep = []
    for s, e in zip(starts, ends):
        keep.append(np.arange(s, e - 1, dtype=np.int64))
    return np.concatenate(keep) if keep else np.empty(0, dtype=np.int64)


def fit_ab(x: RateMatrix, u: RateMatrix, boundaries=(0.0,)) -> tuple[np.ndarray, np.ndarray, FitDiagnostics]:
    """Least-squares fit of (A, B) from one-step transitions.

    Stacks state and input rates into a regressor and solves
    [A|B] = X_shifted * pinv(regressor); transitions straddling a sample
    boundary are excluded. An underdetermined fit (fewer columns than
    unknowns) still yields the minimum-norm solution but is flagged.
    """
    if x.n_steps != u.n_steps or x.step != u.step:
        raise ValueError("state and input rates must share the time grid")
    n_state = x.n_units
    cols = transition_columns(boundaries, x.step, x.n_steps)
    regressor = np.vstack([x.values[:, cols], u.values[:, cols]])
    target = x.values[:, cols + 1]
    inverse, rank = _pinv_with_rank(regressor)
    theta = target @ inverse
    residual = float(np.linalg.norm(target - theta @ regressor))
    diag = FitDiagnostics(
        residual=residual,
        rank_used=rank,
        n_columns=int(cols.size),
        underdetermined=cols.size < n_state + u.n_units,
    )
    return theta[:, :n_state], theta[:, n_state:], diag


def fit_w(x: RateMatrix, ro: RateMatrix) -> np.ndarray:
    """Memoryless readout map: W = Ro * pinv(X)."""
    if x.n_steps != ro.n_steps:
        raise ValueError("state and readout rates must share the time grid")
    return ro.values @ pinv(x.values)


def fit_model(x: RateMatrix, u: RateMatrix, ro: RateMatrix | None = None,
              boundaries=(0.0,)) -> StateSpaceModel:
    a, b, diag = fit_ab(x, u, boundaries)
    w = fit_w(x, ro) if ro is not None else None
    return StateSpaceModel(a=a, b=b, w=w, step_ms=x.step, diagnostics=diag)


def predict(model: StateSpaceModel, u: RateMatrix, x0: np.ndarray,
            boundaries=(0.0,)) -> RateMatrix:
    """Roll the surrogate forward over the input rates.

    ``x0`` holds the anchor state at each sample start (shape (N,) for a
    single sample or (N, n_samples)); within a sample the rollout is free
    running: x[k+1] = A x[k] + B u[k].
    """
    starts = _boundary_columns(boundaries, u.step, u.n_steps)
    anchors = np.asarray(x0, dtype=np.float64)
    if anchors.ndim == 1:
        anchors = anchors[:, None]
    if anchors.shape != (model.n_state, starts.size):
        raise ValueError("need one anchor state per sample start")
    ends = np.append(starts[1:], u.n_steps)
    est = np.empty((model.n_state, u.n_steps))
    # Unstable fitted modes make long free runs overflow; that is a property
    # of the fit (scored as an undefined correlation downstream), not an error.
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (s, e) in enumerate(zip(starts, ends)):
            est[:, s] = anchors[:, i]
            for k in range(s, e - 1):
                est[:, k + 1] = model.a @ est[:, k] + model.b @ u.values[:, k]
    return RateMatrix(values=est, step=u.step, window=u.window)


def pcc(p, q) -> float | None:
    """Pearson correlation over all entries, flattened.

    Returns None when the correlation is undefined: zero variance in either
    argument, or non-finite entries (e.g. an overflowed surrogate rollout).
    """
    pv = (p.values if isinstance(p, RateMatrix) else np.asarray(p, dtype=np.float64)).ravel()
    qv = (q.values if isinstance(q, RateMatrix) else np.asarray(q, dtype=np.float64)).ravel()
    if pv.shape != qv.shape:
        raise ValueError("pcc needs equal shapes")
    if pv.size < 2:
        raise ValueError("pcc needs at least 2 entries")
    if not (np.all(np.isfinite(pv)) and np.all(np.isfinite(qv))):
        return None
    pd = pv - pv.mean()
    qd = qv - qv.mean()
    denom = np.linalg.norm(pd) * np.linalg.norm(qd)
    if denom == 0.0:
        return None
    return float(np.dot(pd, qd) / denom)


def memory_metric(a: np.ndarray, h: float) -> tuple[float, int]:
    """Mean retention timescale h / (1 - |a_i|) over the diagonal of A.

    Diagonal magnitudes at or above 1 - MEMORY_CLAMP_EPS are clamped there and
    counted, so unstable fitted modes stay auditable instead of blowing up the
    mean.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("A must be square")
    mags = np.abs(np.diag(a))
    clamped = int(np.count_nonzero(mags >= 1.0 - MEMORY_CLAMP_EPS))
    mags = np.minimum(mags, 1.0 - MEMORY_CLAMP_EPS)
    return float(np.mean(h / (1.0 - mags))), clamped


@dataclass(frozen=True)
class LyapunovResult:
    mu: float | None              # mean over classes with usable pairs
    per_class: list[float | None]
    n_skipped: int                # classes with identical inputs (zero denominator)


def lyapunov(pairs) -> LyapunovResult:
    """Divergence exponent from same-class sample pairs.

    Each element of ``pairs`` is (u1, u2, x1, x2): input rates and reservoir
    rates of two distinct samples of one class. Per class the exponent is
    ln(||x1 - x2|| / ||u1 - u2||) with Frobenius norms over the whole
    trajectories; the result is the mean over classes with nonzero input
    difference.
    """
    per_class: list[float | None] = []
    values = []
    skipped = 0
    for u1, u2, x1, x2 in pairs:
        du = np.linalg.norm(_values(u1) - _values(u2))
        dx = np.linalg.norm(_values(x1) - _values(x2))
        # dx == 0 (e.g. both responses silent) would give -inf; skip and flag
        # it the same way as an identical-input pair.
        if du == 0.0 or dx == 0.0:
            per_class.append(None)
            skipped += 1
            continue
        mu_i = float(np.log(dx / du))
        per_class.append(mu_i)
        values.append(mu_i)
    mu = float(np.mean(values)) if values else None
    return LyapunovResult(mu=mu, per_class=per_class, n_skipped=skipped)


def _values(m) -> np.ndarray:
    return m.values if isinstance(m, RateMatrix) else np.asarray(m, dtype=np.float64)


@dataclass(frozen=True)
class TrajectorySet:
    """Input, reservoir, and readout rates of one simulated sample set."""

    u: RateMatrix
    x: RateMatrix
    ro: RateMatrix
    boundaries: tuple[float, ...]

    def __post_init__(self):
        if not (self.u.n_steps == self.x.n_steps == self.ro.n_steps):
            raise ValueError("trajectory rate matrices must share the time grid")
        object.__setattr__(self, "boundaries", tuple(self.boundaries))


def transformation_suite(fit_set: TrajectorySet, holdout: TrajectorySet,
                         model: StateSpaceModel | None = None) -> dict[str, float | None]:
    """Fit all six input/state/readout mappings and score them on held-out data.

    Forward: u->x (surrogate rollout), x->ro (readout map), u->x->ro (chained).
    Reverse: ro->x, x->u, ro->x->u, fitted by the same pseudoinverse recipe
    with the roles swapped (memoryless regressions). Returns the PCC of each
    estimate against its held-out ground truth.
    """
    if model is None or model.w is None:
        model = fit_model(fit_set.x, fit_set.u, fit_set.ro, fit_set.boundaries)

    starts = _boundary_columns(holdout.boundaries, holdout.u.step, holdout.u.n_steps)
    anchors = holdout.x.values[:, starts]
    x_est = predict(model, holdout.u, anchors, holdout.boundaries)
    ro_from_x = model.w @ holdout.x.values
    ro_chained = model.w @ x_est.values

    x_from_ro_map = fit_set.x.values @ pinv(fit_set.ro.values)
    u_from_x_map = fit_set.u.values @ pinv(fit_set.x.values)
    x_from_ro = x_from_ro_map @ holdout.ro.values
    u_from_x = u_from_x_map @ holdout.x.values
    u_chained = u_from_x_map @ x_from_ro

    return {
        "pcc_u_to_x": pcc(x_est.values, holdout.x.values),
        "pcc_x_to_ro": pcc(ro_from_x, holdout.ro.values),
        "pcc_u_to_ro": pcc(ro_chained, holdout.ro.values),
        "pcc_ro_to_x": pcc(x_from_ro, holdout.x.values),
        "pcc_x_to_u": pcc(u_from_x, holdout.u.values),
        "pcc_ro_to_u": pcc(u_chained, holdout.u.values),
    }


PCC_FIELDS = ("pcc_u_to_x", "pcc_x_to_ro", "pcc_u_to_ro",
              "pcc_ro_to_x", "pcc_x_to_u", "pcc_ro_to_u")


@dataclass(frozen=True)
class MetricReport:
    """Surrogate metrics of one experiment point, as serialized to metrics.json."""

    tau_m_ms: float
    mu: float | None
    pcc_u_to_x: float | None
    pcc_x_to_ro: float | None
    pcc_u_to_ro: float | None
    pcc_ro_to_x: float | None
    pcc_x_to_u: float | None
    pcc_ro_to_u: float | None
    clamped_modes: int

    def to_json_dict(self) -> dict:
        return {
            "tau_m_ms": self.tau_m_ms,
            "mu": self.mu,
            **{name: getattr(self, name) for name in PCC_FIELDS},
            "clamped_modes": self.clamped_modes,
        }


def save_metric_report(report: MetricReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_json_dict(), sort_keys=True, indent=2))


def load_metric_report(path) -> MetricReport:
    return MetricReport(**json.loads(Path(path).read_text()))


def save_matrix_csv(matrix: np.ndarray, path) -> None:
    """Plain numeric CSV, one matrix row per line, repr-exact floats."""
    rows = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    lines = [",".join(repr(v) for v in row) for row in rows.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().strip().splitlines() if ln.strip()]
    return np.array([[float(v) for v in ln.split(",")] for ln in lines])
