"""Command-line client for the lsmlab service.

Every subcommand except `serve` talks HTTP to the service API. By default an
in-process application instance is used (no server needed for batch work);
pass --base-url to target a running server instead. Long operations are
submitted as jobs and polled until they finish.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

POLL_INTERVAL_S = 0.2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsmlab",
        description="Liquid state machine simulator with a state-space surrogate analyzer",
    )
    parser.add_argument("--base-url", default=None,
                        help="URL of a running lsmlab service; default runs in process")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--job-workers", type=int, default=2)

    gen = sub.add_parser("gen-dataset", help="generate a jittered-Poisson spike dataset")
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--config", help="JSON config file (dataset section)")
    gen.add_argument("--classes", type=int)
    gen.add_argument("--channels", type=int)
    gen.add_argument("--rate-hz", type=float)
    gen.add_argument("--sample-len-ms", type=int)
    gen.add_argument("--jitter-sd-ms", type=float)
    gen.add_argument("--samples-per-class", type=int)
    gen.add_argument("--seed", type=int)

    run = sub.add_parser("run", help="run one experiment point")
    run.add_argument("--dataset", required=True)
    run.add_argument("--out")
    run.add_argument("--alpha-w", type=float)
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--epochs", type=int)
    run.add_argument("--folds", type=int, default=2)
    run.add_argument("--seed", type=int)
    run.add_argument("--accuracy-window", type=int, default=5)
    run.add_argument("--config", help="JSON config file (reservoir/classifier sections)")

    sweep = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    sweep.add_argument("--dataset", required=True)
    sweep.add_argument("--config", required=True,
                       help="JSON config file with a sweep section")
    sweep.add_argument("--out")
    sweep.add_argument("--workers", type=int, default=1)

    base = sub.add_parser("baseline", help="run the reservoir-less benchmark")
    base.add_argument("--dataset", required=True)
    base.add_argument("--epochs", type=int, default=20)
    base.add_argument("--folds", type=int, default=2)
    base.add_argument("--seed", type=int, default=0)
    base.add_argument("--out")
    base.add_argument("--config", help="JSON config file (classifier section)")

    report = sub.add_parser("report", help="metric-vs-accuracy correlations from records.csv")
    report.add_argument("--records", required=True)
    report.add_argument("--accuracy-floor", type=float, default=0.85)
    report.add_argument("--out")

    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _client(base_url: str | None) -> httpx.AsyncClient:
    if base_url is not None:
        return httpx.AsyncClient(base_url=base_url, timeout=None)
    from .service import create_app
    return httpx.AsyncClient(transport=httpx.ASGITransport(app=create_app()),
                             base_url="http://lsmlab.local", timeout=None)


async def _check(resp: httpx.Response) -> dict:
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise SystemExit(f"error ({resp.status_code}): {detail}")
    return resp.json()


async def _run_job(client: httpx.AsyncClient, endpoint: str, payload: dict) -> dict:
    submitted = await _check(await client.post(endpoint, json=payload))
    job_id = submitted["job_id"]
    while True:
        status = await _check(await client.get(f"/jobs/{job_id}"))
        if status["state"] == "done":
            break
        if status["state"] == "error":
            raise SystemExit(f"job {job_id} failed: {status['error']}")
        await asyncio.sleep(POLL_INTERVAL_S)
    return await _check(await client.get(f"/jobs/{job_id}/result"))


async def _dispatch(args: argparse.Namespace) -> int:
    async with _client(args.base_url) as client:
        if args.command == "gen-dataset":
            config = _load_config(args.config).get("dataset", {})
            for flag, key in (("classes", "n_classes"), ("channels", "channels"),
                              ("rate_hz", "rate_hz"), ("sample_len_ms", "sample_len_ms"),
                              ("jitter_sd_ms", "jitter_sd_ms"),
                              ("samples_per_class", "samples_per_class"), ("seed", "seed")):
                value = getattr(args, flag)
                if value is not None:
                    config[key] = value
            result = await _check(await client.post(
                "/dataset", json={"out_dir": args.out, "config": config}))

        elif args.command == "run":
            config = _load_config(args.config)
            payload = {
                "dataset_dir": args.dataset,
                "out_dir": args.out,
                "alpha_w": args.alpha_w,
                "lam": args.lam,
                "seed": args.seed,
                "epochs": args.epochs,
                "folds": args.folds,
                "accuracy_window": args.accuracy_window,
            }
            for section in ("reservoir", "classifier"):
                if section in config:
                    payload[section] = config[section]
            result = await _run_job(client, "/jobs/run", payload)

        elif args.command == "sweep":
            config = _load_config(args.config)
            if "sweep" not in config:
                raise SystemExit("sweep config JSON needs a 'sweep' section")
            payload = {
                "dataset_dir": args.dataset,
                "out_dir": args.out,
                "sweep": config["sweep"],
                "n_workers": args.workers,
            }
            for section in ("reservoir", "classifier"):
                if section in config:
                    payload[section] = config[section]
            result = await _run_job(client, "/jobs/sweep", payload)

        elif args.command == "baseline":
            config = _load_config(args.config)
            payload = {
                "dataset_dir": args.dataset,
                "epochs": args.epochs,
                "folds": args.folds,
                "seed": args.seed,
                "out_dir": args.out,
            }
            if "classifier" in config:
                payload["classifier"] = config["classifier"]
            result = await _run_job(client, "/jobs/baseline", payload)

        elif args.command == "report":
            result = await _check(await client.post("/report", json={
                "records_csv": args.records,
                "accuracy_floor": args.accuracy_floor,
                "out_path": args.out,
            }))

        else:  # pragma: no cover - argparse enforces the choices
            raise SystemExit(f"unknown command {args.command}")

    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(max_workers=args.job_workers),
                    host=args.host, port=args.port)
        return 0
    try:
        return asyncio.run(_dispatch(args))
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
