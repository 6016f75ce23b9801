"""Pydantic request/response models for the service API.

The *Spec models mirror the core config dataclasses field for field, so a
config JSON written for the CLI round-trips through the API unchanged.
"""

from __future__ import annotations

from pydantic import BaseModel

from ..dataset import DatasetConfig
from ..harness import ExperimentRecord, SweepConfig
from ..readout import ClassifierConfig
from ..reservoir import ReservoirConfig


class DatasetSpec(BaseModel):
    n_classes: int = 10
    channels: int = 10
    rate_hz: float = 40.0
    sample_len_ms: int = 200
    jitter_sd_ms: float = 16.0
    samples_per_class: int = 50
    seed: int = 0

    def to_config(self) -> DatasetConfig:
        return DatasetConfig(**self.model_dump())


class ReservoirSpec(BaseModel):
    grid_dims: tuple[int, int, int] = (5, 5, 5)
    f_plus: float = 0.85
    lam: float = 2.0
    k_ee: float = 0.45
    k_ei: float = 0.30
    k_ie: float = 0.60
    k_ii: float = 0.15
    w_ee: float = 3.0
    w_ei: float = 6.0
    w_ie: float = -2.0
    w_ii: float = -2.0
    alpha_w: float = 1.0
    w_in: float = 8.0
    f_in: int = 4
    delay_ms: float = 1.0
    tau1_exc: float = 8.0
    tau2_exc: float = 4.0
    tau1_inh: float = 4.0
    tau2_inh: float = 2.0
    tau_mem: float = 64.0
    t_refrac: float = 3.0
    v_th: float = 20.0
    seed: int = 0

    def to_config(self) -> ReservoirConfig:
        data = self.model_dump()
        data["grid_dims"] = tuple(data["grid_dims"])
        return ReservoirConfig(**data)


class ClassifierSpec(BaseModel):
    n_classes: int = 10
    tau_ca: float = 64.0
    ca_theta: float = 10.0
    ca_band: float = 2.0
    ca_hyst: float = 1.0
    i_teach: float = 10000.0
    p_plus: float = 0.1
    p_minus: float = 0.1
    dw: float = 0.01
    w_lim: float = 8.0
    epochs: int = 20
    seed: int = 0

    def to_config(self) -> ClassifierConfig:
        return ClassifierConfig(**self.model_dump())


class SweepSpec(BaseModel):
    alpha_w_values: list[float]
    lambda_values: list[float] = [2.0]
    structures_per_point: int = 4
    epochs: int = 20
    folds: int = 2
    accuracy_window: int = 5
    seeds: list[int] | None = None

    def to_config(self) -> SweepConfig:
        data = self.model_dump()
        data["alpha_w_values"] = tuple(data["alpha_w_values"])
        data["lambda_values"] = tuple(data["lambda_values"])
        if data["seeds"] is not None:
            data["seeds"] = tuple(data["seeds"])
        return SweepConfig(**data)


class GenerateDatasetRequest(BaseModel):
    out_dir: str
    config: DatasetSpec = DatasetSpec()


class GenerateDatasetResponse(BaseModel):
    path: str
    n_samples: int
    n_classes: int
    total_events: int


class RunRequest(BaseModel):
    dataset_dir: str
    out_dir: str | None = None
    alpha_w: float | None = None   # shortcut overrides of the reservoir spec
    lam: float | None = None
    seed: int | None = None
    epochs: int | None = None
    folds: int = 2
    accuracy_window: int = 5
    reservoir: ReservoirSpec = ReservoirSpec()
    classifier: ClassifierSpec = ClassifierSpec()


class SweepRequest(BaseModel):
    dataset_dir: str
    sweep: SweepSpec
    out_dir: str | None = None
    n_workers: int = 1
    reservoir: ReservoirSpec = ReservoirSpec()
    classifier: ClassifierSpec = ClassifierSpec()


class BaselineRequest(BaseModel):
    dataset_dir: str
    epochs: int = 20
    folds: int = 2
    seed: int = 0
    out_dir: str | None = None
    classifier: ClassifierSpec = ClassifierSpec()


class ReportRequest(BaseModel):
    records_csv: str
    accuracy_floor: float = 0.85
    out_path: str | None = None


class RecordModel(BaseModel):
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
    wall_clock_sim: float
    wall_clock_metric: float

    @classmethod
    def from_record(cls, record: ExperimentRecord) -> "RecordModel":
        return cls(**record.__dict__)


class RunResult(BaseModel):
    record: RecordModel
    metrics: dict
    out_dir: str | None


class SweepResult(BaseModel):
    records: list[RecordModel]
    out_dir: str | None


class BaselineResult(BaseModel):
    accuracy: float
    accuracy_per_epoch: list[float]
    out_dir: str | None


class JobSubmitted(BaseModel):
    job_id: str


class JobStatus(BaseModel):
    job_id: str
    kind: str
    state: str
    error: str | None = None
    created_at: float
    started_at: float | None = None
    finished_at: float | None = None
