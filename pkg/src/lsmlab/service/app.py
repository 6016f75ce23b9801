"""FastAPI application exposing the simulator over HTTP.

Fast operations (dataset generation, correlation reports) answer inline;
runs, sweeps, and baselines are submitted as jobs and polled via /jobs.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..dataset import generate_dataset, load_dataset, save_dataset
from ..harness import (correlation_report, read_records_csv, run_point, run_sweep,
                       write_report_json, write_sweep_outputs)
from ..readout import baseline_reservoirless
from .jobs import DONE, FAILED, Job, JobRegistry
from .schemas import (BaselineRequest, BaselineResult, GenerateDatasetRequest,
                      GenerateDatasetResponse, JobStatus, JobSubmitted,
                      RecordModel, ReportRequest, RunRequest, RunResult,
                      SweepRequest, SweepResult)


def create_app(max_workers: int = 2) -> FastAPI:
    app = FastAPI(title="lsmlab", version=__version__)
    jobs = JobRegistry(max_workers=max_workers)
    app.state.jobs = jobs

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/dataset", response_model=GenerateDatasetResponse)
    def gen_dataset(req: GenerateDatasetRequest):
        try:
            dataset = generate_dataset(req.config.to_config())
            path = save_dataset(dataset, req.out_dir)
        except (ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return GenerateDatasetResponse(
            path=str(path),
            n_samples=len(dataset),
            n_classes=dataset.config.n_classes,
            total_events=sum(r.n_events for r, _ in dataset.samples),
        )

    def _require_dataset(path: str):
        if not (Path(path) / "dataset.json").exists():
            raise HTTPException(status_code=400, detail=f"no dataset at {path}")

    @app.post("/jobs/run", response_model=JobSubmitted)
    def submit_run(req: RunRequest):
        _require_dataset(req.dataset_dir)

        def work() -> RunResult:
            dataset = load_dataset(req.dataset_dir)
            res_cfg = req.reservoir.to_config()
            overrides = {}
            if req.alpha_w is not None:
                overrides["alpha_w"] = req.alpha_w
            if req.lam is not None:
                overrides["lam"] = req.lam
            if req.seed is not None:
                overrides["seed"] = req.seed
            if overrides:
                res_cfg = res_cfg.with_updates(**overrides)
            clf_cfg = req.classifier.to_config()
            clf_cfg = replace(clf_cfg, n_classes=dataset.config.n_classes,
                              epochs=req.epochs if req.epochs is not None else clf_cfg.epochs)
            record = run_point(res_cfg, clf_cfg, dataset,
                               folds=req.folds, accuracy_window=req.accuracy_window)
            out_dir = None
            if req.out_dir is not None:
                out_dir = str(write_sweep_outputs([record], req.out_dir))
            return RunResult(record=RecordModel.from_record(record),
                             metrics=record.metric_report().to_json_dict(),
                             out_dir=out_dir)

        return JobSubmitted(job_id=jobs.submit("run", work).job_id)

    @app.post("/jobs/sweep", response_model=JobSubmitted)
    def submit_sweep(req: SweepRequest):
        _require_dataset(req.dataset_dir)

        def work() -> SweepResult:
            dataset = load_dataset(req.dataset_dir)
            records = run_sweep(dataset, req.sweep.to_config(),
                                req.reservoir.to_config(), req.classifier.to_config(),
                                out_dir=req.out_dir, n_workers=req.n_workers)
            return SweepResult(records=[RecordModel.from_record(r) for r in records],
                               out_dir=req.out_dir)

        return JobSubmitted(job_id=jobs.submit("sweep", work).job_id)

    @app.post("/jobs/baseline", response_model=JobSubmitted)
    def submit_baseline(req: BaselineRequest):
        _require_dataset(req.dataset_dir)

        def work() -> BaselineResult:
            dataset = load_dataset(req.dataset_dir)
            clf_cfg = replace(req.classifier.to_config(),
                              n_classes=dataset.config.n_classes)
            accuracy, per_epoch = baseline_reservoirless(
                dataset, clf_cfg, folds=req.folds, seed=req.seed, epochs=req.epochs)
            out_dir = None
            if req.out_dir is not None:
                out = Path(req.out_dir)
                out.mkdir(parents=True, exist_ok=True)
                write_report_json({"accuracy": accuracy, "accuracy_per_epoch": per_epoch},
                                  out / "baseline.json")
                out_dir = str(out)
            return BaselineResult(accuracy=accuracy, accuracy_per_epoch=per_epoch,
                                  out_dir=out_dir)

        return JobSubmitted(job_id=jobs.submit("baseline", work).job_id)

    def _status(job: Job) -> JobStatus:
        return JobStatus(job_id=job.job_id, kind=job.kind, state=job.state,
                         error=job.error, created_at=job.created_at,
                         started_at=job.started_at, finished_at=job.finished_at)

    @app.get("/jobs", response_model=list[JobStatus])
    def list_jobs():
        return [_status(j) for j in jobs.all()]

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str):
        try:
            return _status(jobs.get(job_id))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")

    @app.get("/jobs/{job_id}/result")
    def job_result(job_id: str):
        try:
            job = jobs.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        if job.state == FAILED:
            raise HTTPException(status_code=500, detail=job.error)
        if job.state != DONE:
            raise HTTPException(status_code=409, detail=f"job is {job.state}")
        return job.result

    @app.post("/report")
    def report(req: ReportRequest):
        path = Path(req.records_csv)
        if not path.exists():
            raise HTTPException(status_code=400, detail=f"no records file at {path}")
        try:
            records = read_records_csv(path)
            result = correlation_report(records, accuracy_floor=req.accuracy_floor)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if req.out_path is not None:
            write_report_json(result, req.out_path)
        return result

    return app


app = create_app()
