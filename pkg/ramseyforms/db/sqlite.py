from __future__ import annotations
import json
import sqlite3
from pathlib import Path
from typing import Any, Dict, List, Sequence

SCHEMA = """
PRAGMA journal_mode=WAL;

CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY,
    digest TEXT NOT NULL,
    command TEXT NOT NULL CHECK (command IN ('verify', 'count', 'sweep', 'decompose')),
    version TEXT NOT NULL,
    header TEXT NOT NULL,
    row_count INTEGER NOT NULL DEFAULT 0,
    updated_at TEXT DEFAULT (datetime('now')),
    UNIQUE(digest, command)
);

CREATE TABLE IF NOT EXISTS run_rows (
    id INTEGER PRIMARY KEY,
    run_id INTEGER NOT NULL REFERENCES runs(id) ON DELETE CASCADE,
    position INTEGER NOT NULL,
    payload TEXT NOT NULL
);

CREATE INDEX IF NOT EXISTS rows_by_run ON run_rows(run_id, position);
"""


def _connect(db_path: Path) -> sqlite3.Connection:
    conn = sqlite3.connect(str(db_path))
    conn.row_factory = sqlite3.Row
    return conn


def init_db(db_path: Path) -> None:
    db_path.parent.mkdir(parents=True, exist_ok=True)
    conn = _connect(db_path)
    try:
        with conn:
            conn.executescript(SCHEMA)
    finally:
        conn.close()


def record_run(db_path: Path, digest: str, header: Dict[str, Any], rows: Sequence[Dict[str, Any]]) -> int:
    """
    Upsert the run keyed by (config digest, command) and replace its rows.

    :return: the run id
    :rtype: int
    """
    init_db(db_path)
    conn = _connect(db_path)
    try:
        with conn:
            conn.execute(
                """
                INSERT INTO runs(digest, command, version, header, row_count)
                VALUES(?, ?, ?, ?, ?)
                ON CONFLICT(digest, command) DO UPDATE SET
                    version=excluded.version,
                    header=excluded.header,
                    row_count=excluded.row_count,
                    updated_at=datetime('now')
                """,
                (digest, header["command"], header["version"], json.dumps(header, sort_keys=True), len(rows)),
            )
            run_id = int(
                conn.execute("SELECT id FROM runs WHERE digest = ? AND command = ?", (digest, header["command"])).fetchone()["id"]
            )
            # rows: replace-all per run
            conn.execute("DELETE FROM run_rows WHERE run_id = ?", (run_id,))
            conn.executemany(
                "INSERT INTO run_rows(run_id, position, payload) VALUES (?, ?, ?)",
                [(run_id, i, json.dumps(r, sort_keys=True)) for i, r in enumerate(rows)],
            )
        return run_id
    finally:
        conn.close()


def fetch_runs(db_path: Path, command: str | None = None) -> List[Dict[str, Any]]:
    conn = _connect(db_path)
    try:
        q = "SELECT id, digest, command, version, header, row_count, updated_at FROM runs"
        params: tuple[Any, ...] = ()
        if command:
            q += " WHERE command = ?"
            params = (command,)
        q += " ORDER BY id"
        out = []
        for r in conn.execute(q, params).fetchall():
            item = dict(r)
            item["header"] = json.loads(item["header"])
            out.append(item)
        return out
    finally:
        conn.close()


def fetch_rows(db_path: Path, run_id: int) -> List[Dict[str, Any]]:
    conn = _connect(db_path)
    try:
        rows = conn.execute("SELECT payload FROM run_rows WHERE run_id = ? ORDER BY position", (run_id,)).fetchall()
        return [json.loads(r["payload"]) for r in rows]
    finally:
        conn.close()
