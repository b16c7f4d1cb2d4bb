from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

from ramseyforms.core.config import load_config, parse_config, with_overrides
from ramseyforms.core.runner import run_count, run_sweep

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SIMPLEX = {
    "command": "count",
    "side": 1.0,
    "cells": 32,
    "set": "random",
    "config": "simplex",
    "directions": [[1.0, 0.0], [0.5, 0.8660254037844386]],
    "a": [1.0, 2.0],
    "b": [0.2, 0.2],
    "lambdas": [1.0],
    "eps": [1.0, 0.5],
    "samples": 200,
    "seed": 3,
}
BOX_PAIR = {
    "command": "count",
    "side": 1.0,
    "cells": 16,
    "set": "random",
    "config": "box",
    "a": [1.0, 1.0],
    "b": [1.0, 1.0],
    "lambdas": [0.25],
    "eps": [1.0, 0.0],
}


class TestRunDeterminism(unittest.TestCase):
    """Reports do not depend on the worker count."""

    def setUp(self) -> None:
        self.tmpdir = tempfile.TemporaryDirectory()
        self.root = Path(self.tmpdir.name)

    def tearDown(self) -> None:
        self.tmpdir.cleanup()

    def _bytes(self, runner, cfg, name: str) -> bytes:
        out = self.root / name
        runner(cfg, out)
        return out.read_bytes()

    def test_count_csv_is_worker_independent(self) -> None:
        """Simplex and pair-slice counts write the same CSV bytes for 1 and 4 workers."""
        for label, raw in (("simplex", SIMPLEX), ("box n=2", BOX_PAIR)):
            with self.subTest(config=label):
                cfg = parse_config(dict(raw, workers=1))
                one = self._bytes(run_count, cfg, f"{label}-1.csv")
                many = self._bytes(run_count, with_overrides(cfg, workers=4), f"{label}-4.csv")
                self.assertEqual(one, many)
                self.assertEqual(cfg.digest(), with_overrides(cfg, workers=4).digest())

    def test_sweep_csv_is_worker_independent(self) -> None:
        """A sweep over one-dimensional box factors writes the same CSV bytes for 1 and 4 workers."""
        cfg = with_overrides(load_config(CONFIGS / "sweep_box_strips.toml"), refine=False)
        one = self._bytes(run_sweep, with_overrides(cfg, workers=1), "sweep-1.csv")
        many = self._bytes(run_sweep, with_overrides(cfg, workers=4), "sweep-4.csv")
        self.assertEqual(one, many)


class TestShippedSweeps(unittest.TestCase):
    """The example sweep configs show what they are written for."""

    def test_strips_have_zero_windows_below_lambda0(self) -> None:
        """Strips against one-dimensional factors: zero windows, then a positive tail."""
        _, summary = run_sweep(load_config(CONFIGS / "sweep_box_strips.toml"))
        self.assertEqual(summary["zero_windows"], [[0.0625, 0.0625], [0.1875, 0.1875]])
        self.assertEqual(summary["lambda0"], 0.21875)
        self.assertGreater(summary["lambda0"], summary["zero_windows"][-1][1])
        self.assertEqual(summary["lambda0_refined"], 0.21875)

    def test_ball_lattice_path_is_stable(self) -> None:
        """Path tree against a ball lattice: finite λ₀ agreeing across widths and grid sizes."""
        cfg = load_config(CONFIGS / "sweep_tree_ball_lattice.toml")
        self.assertEqual(cfg.b, (1.0, 1.0))
        _, summary = run_sweep(cfg)
        lam0 = summary["lambda0"]
        self.assertIsNotNone(lam0)
        self.assertTrue(summary["stable"])
        self.assertEqual(set(summary["lambda0_by_width"].values()), {lam0})
        self.assertEqual(summary["lambda0_by_size"], {"256": lam0, "512": lam0})
        self.assertEqual(summary["lambda0_refined"], lam0)
        self.assertEqual(summary["zero_windows"], [])


if __name__ == "__main__":
    unittest.main()
