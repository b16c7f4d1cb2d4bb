from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ramseyforms import __version__
from ramseyforms.core.config import ExperimentConfig, echo

logger = logging.getLogger(__name__)

LIBRARY = "ramseyforms"


def plain(value: Any) -> Any:
    """numpy scalars and arrays to plain Python values."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def report_header(cfg: ExperimentConfig, command: str, **extra: Any) -> dict[str, Any]:
    """Config echo, grid, library version and the RNG seeds of a run."""
    header: dict[str, Any] = {
        "library": LIBRARY,
        "version": __version__,
        "command": command,
        "config": echo(cfg),
        "grid": {"side": cfg.side, "cells": cfg.cells},
        "seeds": {"seed": cfg.seed, "set_seed": cfg.set_seed},
    }
    header.update(plain(extra))
    return header


def _columns(rows: Sequence[dict[str, Any]]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def _cell(value: Any) -> str:
    value = plain(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return str(value)


def write_csv(path: Path, header: dict[str, Any], rows: Sequence[dict[str, Any]]) -> None:
    """'# key: value' header lines, then a csv table; no timestamps."""
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = _columns(rows)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for key, value in plain(header).items():
            text = value if isinstance(value, str) else json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            fh.write(f"# {key}: {text}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in rows:
            writer.writerow([_cell(r.get(c)) for c in cols])
    logger.info("wrote %d row(s) to %s", len(rows), path)


def write_jsonl(path: Path, header: dict[str, Any], records: Iterable[dict[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps({"header": plain(header)}, sort_keys=True, ensure_ascii=False) + "\n")
        for rec in records:
            fh.write(json.dumps(plain(rec), sort_keys=True, ensure_ascii=False) + "\n")
            count += 1
    logger.info("wrote %d record(s) to %s", count, path)


def write_report(path: Path, header: dict[str, Any], rows: Sequence[dict[str, Any]]) -> None:
    """CSV or JSON-lines by the suffix of path."""
    if path.suffix.lower() == ".jsonl":
        write_jsonl(path, header, rows)
    else:
        write_csv(path, header, rows)


def write_summary(path: Path, data: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(plain(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def read_csv(path: Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Header lines and rows of a report written by write_csv."""
    header: dict[str, str] = {}
    body: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition(": ")
            header[key] = value
        else:
            body.append(line)
    return header, list(csv.DictReader(body))


def read_jsonl(path: Path) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    lines = [json.loads(x) for x in path.read_text(encoding="utf-8").splitlines() if x.strip()]
    if not lines or "header" not in lines[0]:
        raise ValueError(f"{path} has no header line")
    return lines[0]["header"], lines[1:]
