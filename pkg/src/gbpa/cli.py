"""Command line entry points.

Exit codes: 0 success, 2 configuration or input problems, 3 execution
failures (aborted runs, scheduler/scorer disagreement).
"""
from __future__ import annotations

import json
import os
import sys

import click

from .errors import EngineError, GbpaError, HarnessError, OptimizerError, SpecError
from .fixtures import write_scenario_assets
from .harness import JsonlAuditWriter, compare, run_scenario, to_json
from .scenarios import get_scenario, scenario_names

_CONFIG_ERRORS = (SpecError, HarnessError, KeyError)
_RUNTIME_ERRORS = (EngineError, OptimizerError)


@click.group()
def main() -> None:
    """Business process runs: simulate, optimize, inspect."""


def _resolve_scenario(name: str):
    try:
        return get_scenario(name)
    except KeyError as exc:
        click.echo(f"error: {exc.args[0]}", err=True)
        sys.exit(2)


def _run(name: str, seed: int, assets: str | None, audit: str | None):
    scenario = _resolve_scenario(name)
    sink = JsonlAuditWriter(audit) if audit else None
    try:
        return run_scenario(scenario, seed=seed, assets_dir=assets, audit_sink=sink)
    except _CONFIG_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except _RUNTIME_ERRORS as exc:
        click.echo(f"execution failed: {exc}", err=True)
        sys.exit(3)
    finally:
        if sink is not None:
            sink.close()


@main.command()
@click.option("--scenario", "name", required=True,
              help=f"One of: {', '.join(scenario_names())}")
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--assets", default=None, type=click.Path(),
              help="Asset bundle directory (omit to generate in memory).")
@click.option("--audit", default=None, type=click.Path(),
              help="Append the runs' audit trails to this JSONL file.")
@click.option("--format", "fmt", default="table",
              type=click.Choice(["table", "json"]), show_default=True)
def simulate(name: str, seed: int, assets: str | None, audit: str | None, fmt: str) -> None:
    """Run a scenario baseline and optimized under virtual time."""
    result = _run(name, seed, assets, audit)
    if fmt == "json":
        click.echo(json.dumps(to_json(result), indent=2, sort_keys=True))
    else:
        click.echo(compare(result))


@main.command()
@click.option("--scenario", "name", required=True,
              help=f"One of: {', '.join(scenario_names())}")
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--assets", default=None, type=click.Path())
@click.option("--format", "fmt", default="json",
              type=click.Choice(["table", "json"]), show_default=True)
def report(name: str, seed: int, assets: str | None, fmt: str) -> None:
    """Machine-readable before/after metrics for a scenario."""
    result = _run(name, seed, assets, None)
    if fmt == "table":
        click.echo(compare(result))
    else:
        click.echo(json.dumps(to_json(result), indent=2, sort_keys=True))


@main.command()
@click.option("--out", required=True, type=click.Path(),
              help="Directory to write asset bundles into.")
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--scenario", "name", default="all", show_default=True,
              help="Scenario name, or 'all'.")
def fixtures(out: str, seed: int, name: str) -> None:
    """Write deterministic scenario assets (specs, logs, corpora) to disk."""
    names = scenario_names() if name == "all" else [name]
    try:
        for n in names:
            root = write_scenario_assets(get_scenario(n), out, seed=seed)
            click.echo(f"wrote {root}")
    except GbpaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except KeyError as exc:
        click.echo(f"error: {exc.args[0]}", err=True)
        sys.exit(2)


@main.command()
@click.option("--host", default=None, help="Bind host (default from GBPA_ADDR).")
@click.option("--port", default=None, type=int, help="Bind port (default from GBPA_ADDR).")
@click.option("--data-dir", default=None, type=click.Path(),
              help="Persistence directory (default from GBPA_DATA_DIR).")
@click.option("--token", default=None, help="Bearer token (default from GBPA_TOKEN).")
def serve(host: str | None, port: int | None, data_dir: str | None, token: str | None) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    addr = os.environ.get("GBPA_ADDR", "127.0.0.1:8600")
    default_host, _, default_port = addr.partition(":")
    app = create_app(
        data_dir=data_dir or os.environ.get("GBPA_DATA_DIR"),
        token=token if token is not None else os.environ.get("GBPA_TOKEN"),
        planner_url=os.environ.get("GBPA_PLANNER_URL"),
    )
    uvicorn.run(
        app,
        host=host or default_host or "127.0.0.1",
        port=port or int(default_port or 8600),
    )


if __name__ == "__main__":
    main()
