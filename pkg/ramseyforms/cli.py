import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ramseyforms.core.config import load_config, with_overrides
from ramseyforms.core.report import plain
from ramseyforms.core.runner import RUNNERS


def _print_json(data: object) -> None:
    print(json.dumps(data, indent=2, ensure_ascii=False))


def _default_db() -> Path | None:
    raw = os.environ.get("RAMSEYFORMS_DB", "").strip()
    return Path(raw) if raw else None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, required=True, help="Experiment config (.toml or .json)")
    p.add_argument("--out", type=Path, default=None, help="Report path (.csv or .jsonl)")
    p.add_argument("--workers", type=int, default=None, help="Worker threads (overrides the config)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
    p.add_argument("--db", type=Path, default=_default_db(), help="SQLite run ledger (or set RAMSEYFORMS_DB)")
    p.add_argument("--log-level", type=str, default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description="ramseyforms: counting forms for anisotropic point configurations on periodic grids")
    sub = p.add_subparsers(dest="cmd", required=True)
    _add_common(sub.add_parser("verify", help="Run identity and inequality suites"))
    _add_common(sub.add_parser("count", help="Evaluate counting forms over λ and ε"))
    _add_common(sub.add_parser("sweep", help="Sweep λ and estimate λ₀"))
    _add_common(sub.add_parser("decompose", help="Structured / error / uniform decomposition over a scale ladder"))
    return p


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = load_config(args.config)
        cfg = with_overrides(cfg, command=args.cmd, seed=args.seed, workers=args.workers)
    except (ValueError, OSError) as e:
        print(str(e), file=sys.stderr)
        raise SystemExit(2)

    try:
        code, summary = RUNNERS[args.cmd](cfg, args.out, args.db)
    except ValueError as e:
        print(str(e), file=sys.stderr)
        raise SystemExit(2)
    _print_json(plain(summary))
    if code:
        raise SystemExit(code)


if __name__ == "__main__":
    main()
