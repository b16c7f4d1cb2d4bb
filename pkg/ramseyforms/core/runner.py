from __future__ import annotations

import logging
import math
import time
from pathlib import Path
from typing import Any

from ramseyforms.core.config import ExperimentConfig
from ramseyforms.core.counting import (
    BoxSpec,
    TreeSpec,
    box_form_bruteforce,
    box_kernels,
    count_form,
    tree_form_bruteforce,
    tree_kernels,
)
from ramseyforms.core.multiscale import (
    DecompositionReport,
    covering_multiplicity,
    decompose,
    growth_slope,
    lambda0_sweep,
)
from ramseyforms.core.report import plain, report_header, write_jsonl, write_report, write_summary
from ramseyforms.core.suites import DEFAULT_SUITES, SuiteContext, run_suite
from ramseyforms.db.sqlite import record_run

logger = logging.getLogger(__name__)

ORACLE_MAX_CELLS = 16
EXIT_OK = 0
EXIT_FAILED = 1


def _count_options(cfg: ExperimentConfig) -> dict[str, Any]:
    return {
        "shell_width": cfg.shell_width,
        "coverage": cfg.coverage,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "workers": cfg.workers,
    }


def _finish(cfg: ExperimentConfig, command: str, header: dict[str, Any], rows: list[dict[str, Any]], out: Path | None, db: Path | None) -> None:
    if out is not None:
        if command == "verify":
            write_jsonl(out, header, rows)
        else:
            write_report(out, header, rows)
    if db is not None:
        run_id = record_run(db, cfg.digest(), plain(header), plain(rows))
        logger.info("recorded run %d in %s", run_id, db)


def run_verify(cfg: ExperimentConfig, out: Path | None = None, db: Path | None = None) -> tuple[int, dict[str, Any]]:
    """
    Run the selected verification suites.

    :return: exit code (0 iff every check passed) and the summary
    :rtype: tuple[int, dict[str, Any]]
    """
    ctx = SuiteContext(side=cfg.side, trials=cfg.trials, samples=cfg.samples, seed=cfg.seed, workers=cfg.workers)
    names = cfg.suites or DEFAULT_SUITES
    records: list[dict[str, Any]] = []
    summary: dict[str, Any] = {"suites": {}}
    for name in names:
        start = time.perf_counter()
        recs = run_suite(name, ctx)
        elapsed = time.perf_counter() - start
        logger.info("suite %s took %.2fs", name, elapsed)
        failed = [r["check"] for r in recs if not r["passed"]]
        summary["suites"][name] = {"checks": len(recs), "failed": failed}
        if cfg.timings:
            for r in recs:
                r["runtime_s"] = elapsed
        records.extend(recs)
    summary["passed"] = all(not s["failed"] for s in summary["suites"].values())
    header = report_header(cfg, "verify", suites=list(names))
    _finish(cfg, "verify", header, records, out, db)
    return (EXIT_OK if summary["passed"] else EXIT_FAILED), summary


def _oracle(cfg: ExperimentConfig, f: Any, spec: Any, lam: float, eps: float) -> float | None:
    if cfg.cells > ORACLE_MAX_CELLS:
        return None
    if isinstance(spec, BoxSpec):
        return box_form_bruteforce(f, box_kernels(f.grid, spec, lam, eps, cfg.shell_width), spec.plane_dims)
    if isinstance(spec, TreeSpec):
        return tree_form_bruteforce(f, spec, tree_kernels(f.grid, spec, lam, eps, cfg.shell_width))
    return None


def run_count(cfg: ExperimentConfig, out: Path | None = None, db: Path | None = None) -> tuple[int, dict[str, Any]]:
    """One row per (λ, ε): the form value, its standard error for Monte Carlo forms, and the oracle when asked."""
    f = cfg.build_field()
    spec = cfg.spec()
    opts = _count_options(cfg)
    rows: list[dict[str, Any]] = []
    for lam in cfg.scales():
        for eps in cfg.eps:
            start = time.perf_counter()
            value, stderr = count_form(f, spec, lam, eps, **opts)
            elapsed = time.perf_counter() - start
            logger.info("count λ=%.6g ε=%.6g: %.12g (%.2fs)", lam, eps, value, elapsed)
            row: dict[str, Any] = {"lam": lam, "eps": eps, "value": value}
            if stderr is not None:
                row["stderr"] = stderr
            if cfg.oracle:
                row["oracle"] = _oracle(cfg, f, spec, lam, eps)
            if cfg.timings:
                row["runtime_s"] = elapsed
            rows.append(row)
    header = report_header(cfg, "count", density=float(f.values.mean()))
    _finish(cfg, "count", header, rows, out, db)
    return EXIT_OK, {"rows": len(rows), "values": [r["value"] for r in rows]}


def run_sweep(cfg: ExperimentConfig, out: Path | None = None, db: Path | None = None) -> tuple[int, dict[str, Any]]:
    """Per-λ singular counts and the λ₀ estimate; the summary also goes to <out>.summary.json."""
    f = cfg.build_field()
    spec = cfg.spec()
    opts = _count_options(cfg)
    opts.pop("shell_width")
    res = lambda0_sweep(
        f,
        spec,
        cfg.scales(),
        eps_list=cfg.eps if "eps" in cfg.raw else (),
        widths=(2.0 * cfg.shell_width, cfg.shell_width),
        refine=cfg.refine,
        sizes=cfg.refine_cells,
        **opts,
    )
    summary = {k: v for k, v in res.items() if k != "rows"}
    header = report_header(cfg, "sweep", lambda0=res["lambda0"], stable=res["stable"])
    _finish(cfg, "sweep", header, res["rows"], out, db)
    if out is not None:
        write_summary(Path(str(out) + ".summary.json"), summary)
    return EXIT_OK, summary


def run_decompose(cfg: ExperimentConfig, out: Path | None = None, db: Path | None = None) -> tuple[int, dict[str, Any]]:
    """
    decompose over the ladder scales, plus the ladder sum Σ_j |Nᵉ - N¹| and the growth slope of
    its partial sums.
    """
    f = cfg.build_field()
    spec = cfg.spec()
    opts = _count_options(cfg)
    ladder = cfg.ladder()
    eps = ladder.eps if ladder is not None else min(cfg.eps)
    report = DecompositionReport()
    for lam in cfg.scales():
        start = time.perf_counter()
        row = decompose(f, spec, lam, eps, **opts)
        elapsed = time.perf_counter() - start
        logger.info("decompose λ=%.6g: error %.6g uniform %.6g (%.2fs)", lam, row["error"], row["uniform"], elapsed)
        if cfg.timings:
            row["runtime_s"] = elapsed
        report.rows.append(row)
    per_scale = [abs(r["error"]) for r in report.rows]
    report.ladder_sum = math.fsum(per_scale)
    report.slope = growth_slope(per_scale)
    report.metadata = {"eps": eps, "bookkeeping": report.check_bookkeeping()}
    if ladder is not None:
        report.metadata["covering_multiplicity"] = covering_multiplicity(ladder)
    summary = {"ladder_sum": report.ladder_sum, "slope": report.slope, **report.metadata}
    header = report_header(cfg, "decompose", **summary)
    _finish(cfg, "decompose", header, report.rows, out, db)
    return EXIT_OK, summary


RUNNERS = {
    "verify": run_verify,
    "count": run_count,
    "sweep": run_sweep,
    "decompose": run_decompose,
}
