"""Command-line client for the simulator service.

Subcommands run, importance, and coverage execute a scenario and write the
returned artifacts to --out-dir. By default they call the service layer
in-process; with --server they post the same request to a remote instance.
Exit codes: 0 success, 2 invalid config, 3 ingestion failure, 4 runtime error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, apply_overrides, load_config
from .ingest import IngestionError
from .runner import ResultBundle, execute_coverage, execute_importance, execute_run
from .scenarios import ScenarioError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGEST = 3
EXIT_RUNTIME = 4

_LOCAL_EXECUTORS = {
    "run": execute_run,
    "importance": execute_importance,
    "coverage": execute_coverage,
}

_REMOTE_PATHS = {
    "run": "/api/run",
    "importance": "/api/importance",
    "coverage": "/api/coverage",
}


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellres", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", required=True, help="path to the JSON run config")
        p.add_argument("--out-dir", default="out", help="directory for output files")
        p.add_argument("--server", help="base URL of a running cellres service")
        p.add_argument("--seed", type=int, help="override scenario seed")
        p.add_argument("--runs", type=int, help="override number of runs")
        p.add_argument("--p-iso", type=float, dest="p_iso",
                       help="isolated failure probability (sets failure kind)")
        p.add_argument("--r-fail", type=float, dest="r_fail",
                       help="correlated failure radius in meters (sets failure kind)")
        p.add_argument("--p-pop", type=float, dest="p_pop", help="user surge percentage")
        p.add_argument("--mode", choices=["per-operator", "roaming", "both"],
                       help="association mode")

    add_common(sub.add_parser("run", help="execute the scenario and write FDP/FSP results"))
    add_common(sub.add_parser("importance", help="per-cell importance sweep"))
    add_common(sub.add_parser("coverage", help="best-SINR rasters and ECDFs"))

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _prepare_config(args) -> RunConfig:
    cfg = load_config(args.config)
    return apply_overrides(
        cfg,
        seed=args.seed,
        runs=args.runs,
        p_iso=args.p_iso,
        r_fail_m=args.r_fail,
        p_pop=args.p_pop,
        mode=args.mode,
    )


def _execute_remote(server: str, command: str, cfg: RunConfig) -> dict:
    import httpx

    url = server.rstrip("/") + _REMOTE_PATHS[command]
    try:
        response = httpx.post(url, json={"config": cfg.model_dump(mode="json")}, timeout=None)
    except httpx.HTTPError as exc:
        raise _CliError(EXIT_RUNTIME, f"cannot reach server {server}: {exc}") from exc
    if response.status_code == 200:
        return response.json()
    try:
        payload = response.json()
    except ValueError:
        raise _CliError(EXIT_RUNTIME, f"server error {response.status_code}: {response.text}")
    kind = payload.get("kind", "runtime")
    detail = payload.get("detail", response.text)
    code = {"config": EXIT_CONFIG, "ingestion": EXIT_INGEST}.get(kind, EXIT_RUNTIME)
    raise _CliError(code, f"server rejected request ({kind}): {detail}")


def _execute_local(command: str, cfg: RunConfig) -> dict:
    try:
        bundle: ResultBundle = _LOCAL_EXECUTORS[command](cfg)
    except ConfigError as exc:
        raise _CliError(EXIT_CONFIG, str(exc)) from exc
    except ScenarioError as exc:
        raise _CliError(EXIT_CONFIG, str(exc)) from exc
    except (IngestionError, FileNotFoundError) as exc:
        raise _CliError(EXIT_INGEST, str(exc)) from exc
    except Exception as exc:
        raise _CliError(EXIT_RUNTIME, f"runtime error: {exc}") from exc
    return {"files": bundle.files, "manifest": bundle.manifest, "summary": bundle.summary}


def _write_files(out_dir: str, files: dict[str, str]) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(files):
        path = out / name
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(files[name])
        written.append(str(path))
    return written


def _run_command(args) -> int:
    try:
        cfg = _prepare_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.server:
            payload = _execute_remote(args.server, args.command, cfg)
        else:
            payload = _execute_local(args.command, cfg)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    written = _write_files(args.out_dir, payload["files"])
    if args.command == "run":
        aggregates = payload.get("aggregates")
        if aggregates is None:
            aggregates = payload.get("summary", {}).get("aggregates", [])
        for entry in aggregates:
            print(
                f"{entry['mode']:>12} {entry['operator']:>10}: "
                f"FDP {entry['fdp_mean']:.4f} +/- {entry['fdp_std']:.4f}  "
                f"FSP {entry['fsp_mean']:.4f} +/- {entry['fsp_std']:.4f}"
            )
    print(f"wrote {len(written)} files to {args.out_dir}")
    return EXIT_OK


def _serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return _serve(args)
    return _run_command(args)


if __name__ == "__main__":
    sys.exit(main())
