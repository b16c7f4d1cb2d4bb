from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from fastmcp import FastMCP

from ramseyforms import __version__
from ramseyforms.core.config import ExperimentConfig, parse_config
from ramseyforms.core.errors import ConfigurationError
from ramseyforms.core.runner import RUNNERS
from ramseyforms.core.suites import DEFAULT_SUITES, SUITES
from ramseyforms.db.sqlite import fetch_runs


@dataclass(frozen=True)
class cfg:
    """
    Configuration for ramseyforms MCP tools, loaded from environment variables with defaults.
    """
    db: Optional[Path]
    workers: int = 1
    max_cells: int = 128


def _cfg() -> cfg:
    """
    Load configuration from environment variables, with defaults.

    :return: db path (None when unset), default worker count and the grid cap
    :rtype: cfg
    """
    raw_db = os.environ.get("RAMSEYFORMS_DB")
    db = Path(raw_db).expanduser() if raw_db and raw_db.strip() else None

    try:
        workers = int(os.environ.get("RAMSEYFORMS_WORKERS", "1"))
        max_cells = int(os.environ.get("RAMSEYFORMS_MAX_CELLS", "128"))
    except ValueError as e:
        raise RuntimeError(f"RAMSEYFORMS_WORKERS / RAMSEYFORMS_MAX_CELLS must be integers: {e}") from None

    return cfg(db=db, workers=max(1, workers), max_cells=max(1, max_cells))


def _require_grid(c: cfg, experiment: ExperimentConfig) -> None:
    """
    Refuse grids above the server cap.

    :param c: server configuration
    :param experiment: parsed experiment config
    """
    if experiment.cells > c.max_cells:
        raise RuntimeError(f"cells = {experiment.cells} exceeds RAMSEYFORMS_MAX_CELLS = {c.max_cells}")


def _run(command: str, config: dict[str, Any]) -> dict[str, Any]:
    c = _cfg()
    raw = dict(config)
    raw["command"] = command
    raw.setdefault("workers", c.workers)
    try:
        experiment = parse_config(raw)
    except ConfigurationError as e:
        return {"error": str(e)}
    _require_grid(c, experiment)
    code, summary = RUNNERS[command](experiment, None, c.db)
    return {"command": command, "digest": experiment.digest(), "exit_code": code, "summary": summary}


mcp = FastMCP("ramseyforms", __version__)


@mcp.tool("ramseyforms_health")
def ramseyforms_health() -> dict[str, Any]:
    """
    Server configuration, available suites and the number of recorded runs.
    """
    c = _cfg()
    runs = len(fetch_runs(c.db)) if c.db is not None and c.db.is_file() else 0
    return {
        "version": __version__,
        "db": str(c.db) if c.db is not None else None,
        "workers": c.workers,
        "max_cells": c.max_cells,
        "suites": sorted(SUITES),
        "default_suites": list(DEFAULT_SUITES),
        "recorded_runs": runs,
    }


@mcp.tool("ramseyforms_count")
def ramseyforms_count(config: dict[str, Any]) -> dict[str, Any]:
    """
    Evaluate a counting form over the config's λ and ε grid.
    The config uses the same keys as a config file; 'side', 'cells' and 'lambdas' are required.
    """
    return _run("count", config)


@mcp.tool("ramseyforms_decompose")
def ramseyforms_decompose(config: dict[str, Any]) -> dict[str, Any]:
    """
    Structured / error / uniform parts over a lacunary ladder, with the ladder sum and growth slope.
    Needs 'ladder_start' (or 'lambdas') besides 'side' and 'cells'.
    """
    return _run("decompose", config)


@mcp.tool("ramseyforms_verify")
def ramseyforms_verify(config: dict[str, Any]) -> dict[str, Any]:
    """
    Run verification suites; 'suites' selects a subset, the default runs every suite.
    """
    return _run("verify", config)


if __name__ == "__main__":
    mcp.run(transport="stdio")
