"""In-memory job registry backing the long-running endpoints."""

from __future__ import annotations

import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import time
from typing import Any, Callable

QUEUED = "queued"
RUNNING = "running"
DONE = "done"
FAILED = "error"


@dataclass
class Job:
    job_id: str
    kind: str
    state: str = QUEUED
    error: str | None = None
    created_at: float = field(default_factory=time)
    started_at: float | None = None
    finished_at: float | None = None
    result: Any = None


class JobRegistry:
    """Tracks submitted jobs and runs them on a small thread pool."""

    def __init__(self, max_workers: int = 2):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=max_workers)

    def submit(self, kind: str, fn: Callable[[], Any]) -> Job:
        job = Job(job_id=uuid.uuid4().hex[:12], kind=kind)
        with self._lock:
            self._jobs[job.job_id] = job

        def runner():
            with self._lock:
                job.state = RUNNING
                job.started_at = time()
            try:
                result = fn()
            except Exception as exc:  # surfaced through the job status
                with self._lock:
                    job.state = FAILED
                    job.error = f"{type(exc).__name__}: {exc}"
                    job.finished_at = time()
                traceback.print_exc()
                return
            with self._lock:
                job.result = result
                job.state = DONE
                job.finished_at = time()

        self._pool.submit(runner)
        return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise KeyError(job_id)
            return self._jobs[job_id]

    def all(self) -> list[Job]:
        with self._lock:
            return sorted(self._jobs.values(), key=lambda j: j.created_at)
