from __future__ import annotations

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from ramseyforms import __version__
from ramseyforms.core.config import parse_config
from ramseyforms.core.report import (
    plain,
    read_csv,
    read_jsonl,
    report_header,
    write_csv,
    write_jsonl,
    write_report,
    write_summary,
)


class TestReports(unittest.TestCase):
    """CSV and JSON-lines reports with their headers."""

    def setUp(self) -> None:
        self.tmpdir = tempfile.TemporaryDirectory()
        self.root = Path(self.tmpdir.name)
        self.cfg = parse_config({"side": 1.0, "cells": 32, "lambdas": [0.125], "seed": 4})
        self.header = report_header(self.cfg, "count", density=np.float64(0.25))
        self.rows = [
            {"lam": 0.125, "eps": 0.5, "value": 0.1 + 0.2},
            {"lam": 0.25, "eps": 0.5, "value": np.float64(1.0 / 3.0), "oracle": None},
        ]

    def tearDown(self) -> None:
        self.tmpdir.cleanup()

    def test_header(self) -> None:
        """Headers carry the config echo, grid, version and seeds."""
        self.assertEqual(self.header["library"], "ramseyforms")
        self.assertEqual(self.header["version"], __version__)
        self.assertEqual(self.header["grid"], {"side": 1.0, "cells": 32})
        self.assertEqual(self.header["seeds"]["seed"], 4)
        self.assertEqual(self.header["config"]["lambdas"], [0.125])
        self.assertIsInstance(self.header["density"], float)

    def test_plain(self) -> None:
        """numpy values become plain Python values."""
        out = plain({"a": np.arange(3), "b": (np.bool_(True), np.int64(2)), 3: np.float32(0.5)})
        self.assertEqual(out, {"a": [0, 1, 2], "b": [True, 2], "3": 0.5})
        json.dumps(out)

    def test_csv(self) -> None:
        """CSV reports carry the header lines and the table."""
        path = self.root / "out" / "count.csv"
        write_csv(path, self.header, self.rows)
        header, rows = read_csv(path)
        self.assertEqual(header["command"], "count")
        self.assertEqual(json.loads(header["grid"]), {"cells": 32, "side": 1.0})
        self.assertEqual(list(rows[0]), ["lam", "eps", "value", "oracle"])
        self.assertEqual(float(rows[0]["value"]), 0.1 + 0.2)
        self.assertEqual(float(rows[1]["value"]), 1.0 / 3.0)
        self.assertEqual(rows[0]["oracle"], "")

    def test_reports_are_byte_identical(self) -> None:
        """Writing the same rows twice gives the same bytes."""
        a = self.root / "a.csv"
        b = self.root / "b.csv"
        write_csv(a, self.header, self.rows)
        write_csv(b, self.header, self.rows)
        self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_jsonl(self) -> None:
        """JSON-lines reports hold the header then one record per row."""
        path = self.root / "suite.jsonl"
        write_jsonl(path, self.header, self.rows)
        header, records = read_jsonl(path)
        self.assertEqual(header["command"], "count")
        self.assertEqual(len(records), 2)
        self.assertIsNone(records[1]["oracle"])
        first = path.read_text(encoding="utf-8").splitlines()[0]
        self.assertTrue(first.startswith('{"header": '))

    def test_write_report_dispatches_on_suffix(self) -> None:
        """The report format follows the suffix."""
        write_report(self.root / "r.jsonl", self.header, self.rows)
        write_report(self.root / "r.csv", self.header, self.rows)
        self.assertTrue((self.root / "r.jsonl").read_text(encoding="utf-8").startswith("{"))
        self.assertTrue((self.root / "r.csv").read_text(encoding="utf-8").startswith("# library: ramseyforms"))

    def test_summary(self) -> None:
        """Summaries are written as JSON."""
        path = self.root / "s.json"
        write_summary(path, {"lambda0": np.float64(0.5), "stable": np.bool_(True)})
        self.assertEqual(json.loads(path.read_text(encoding="utf-8")), {"lambda0": 0.5, "stable": True})

    def test_missing_header(self) -> None:
        """Reading a report without a header fails."""
        path = self.root / "bad.jsonl"
        path.write_text('{"a": 1}\n', encoding="utf-8")
        with self.assertRaises(ValueError):
            read_jsonl(path)


if __name__ == "__main__":
    unittest.main()
