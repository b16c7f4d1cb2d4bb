from __future__ import annotations

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from ramseyforms.core.config import echo, load_config, parse_config, with_overrides
from ramseyforms.core.counting import BoxSpec, SimplexSpec, TreeSpec
from ramseyforms.core.errors import ConfigurationError, DimensionError, WraparoundError
from ramseyforms.core.grid import Grid, save_field
from ramseyforms.core.sets import ball_lattice, build_set, random_set, strips

BASE = {"side": 1.0, "cells": 32, "lambdas": [0.125, 0.25]}


class TestSets(unittest.TestCase):
    """Built-in sets."""

    def setUp(self) -> None:
        self.grid = Grid(2, 1.0, 32)

    def test_random_set(self) -> None:
        """Random sets are seeded and honour the density range."""
        f = random_set(self.grid, 0.3, seed=1)
        self.assertTrue(f.is_indicator())
        self.assertAlmostEqual(float(np.mean(f.values)), 0.3, delta=0.05)
        np.testing.assert_array_equal(f.values, random_set(self.grid, 0.3, seed=1).values)
        with self.assertRaises(ConfigurationError):
            random_set(self.grid, 1.5, seed=1)

    def test_strips(self) -> None:
        """Strips follow width, period and axis."""
        f = strips(self.grid, 0.125, 0.25)
        self.assertAlmostEqual(float(np.mean(f.values)), 0.5)
        with self.assertRaises(ConfigurationError):
            strips(self.grid, 0.3, 0.25)
        with self.assertRaises(ConfigurationError):
            strips(self.grid, 0.1, 0.25, axis=2)

    def test_ball_lattice(self) -> None:
        """Ball lattices need positive period and radius."""
        f = ball_lattice(self.grid, 0.25, 0.1)
        self.assertTrue(f.is_indicator())
        self.assertGreater(float(np.mean(f.values)), 0.0)
        self.assertLess(float(np.mean(f.values)), 1.0)

    def test_build_set_from_file(self) -> None:
        """File sets load and must match the configured grid."""
        with tempfile.TemporaryDirectory() as td:
            path = Path(td) / "set.bin"
            src = random_set(self.grid, 0.5, seed=2)
            save_field(path, src)
            f = build_set(self.grid, "file", {"path": str(path)})
            np.testing.assert_array_equal(f.values, src.values)
            with self.assertRaises(DimensionError):
                build_set(Grid(2, 1.0, 16), "file", {"path": str(path)})
        self.assertEqual(float(np.sum(build_set(self.grid, "empty", {}).values)), 0.0)
        with self.assertRaises(ConfigurationError):
            build_set(self.grid, "cantor", {})


class TestParseConfig(unittest.TestCase):
    """Validation of experiment configs."""

    def test_required_keys(self) -> None:
        """side and cells are required."""
        for key in ("side", "cells"):
            raw = dict(BASE)
            del raw[key]
            with self.subTest(key=key):
                with self.assertRaisesRegex(ConfigurationError, key):
                    parse_config(raw)

    def test_unknown_key(self) -> None:
        """Unknown keys are rejected by name."""
        with self.assertRaisesRegex(ConfigurationError, "colour"):
            parse_config(dict(BASE, colour="red"))

    def test_box_defaults(self) -> None:
        """A bare config is a box with one factor."""
        cfg = parse_config(dict(BASE))
        self.assertEqual(cfg.command, "count")
        self.assertIsInstance(cfg.spec(), BoxSpec)
        self.assertEqual(cfg.grid(), Grid(2, 1.0, 32))
        self.assertEqual(cfg.scales(), (0.125, 0.25))
        self.assertEqual(cfg.build_field().values.shape, (32, 32))

    def test_tree_and_simplex(self) -> None:
        """Tree and simplex configs build their specs."""
        tree = parse_config(dict(BASE, config="tree", a=[1.0, 2.0], b=[1.0, 1.0], edges=[[0, 1], [0, 2]], lambdas=[0.25]))
        spec = tree.spec()
        self.assertIsInstance(spec, TreeSpec)
        self.assertEqual(spec.edges, ((0, 1), (0, 2)))
        simplex = parse_config(dict(BASE, config="simplex", a=[1.0, 1.0], b=[0.2, 0.2], directions=[[1.0, 0.0], [0.0, 1.0]], lambdas=[1.0]))
        self.assertIsInstance(simplex.spec(), SimplexSpec)
        self.assertEqual(simplex.grid().dim, 3)
        with self.assertRaisesRegex(ConfigurationError, "directions"):
            parse_config(dict(BASE, config="simplex", lambdas=[0.1]))

    def test_wraparound_is_checked_up_front(self) -> None:
        """Scales beyond R/4 fail at parse time."""
        with self.assertRaises(WraparoundError):
            parse_config(dict(BASE, lambdas=[0.5]))

    def test_command_specific_keys(self) -> None:
        """Each command demands its own keys."""
        with self.assertRaisesRegex(ConfigurationError, "ladder_start"):
            parse_config({"side": 1.0, "cells": 32, "command": "decompose"})
        cfg = parse_config({"side": 1.0, "cells": 32, "command": "decompose", "ladder_start": 0.03, "ladder_count": 3, "eps": [0.5]})
        self.assertEqual(cfg.scales(), (0.03, 0.06, 0.12))
        with self.assertRaisesRegex(ConfigurationError, "lambdas"):
            parse_config({"side": 1.0, "cells": 32, "command": "sweep"})
        verify = parse_config({"side": 1.0, "cells": 8, "command": "verify", "suites": ["covering"]})
        self.assertEqual(verify.suites, ("covering",))
        with self.assertRaisesRegex(ConfigurationError, "set_period"):
            parse_config(dict(BASE, set="ball-lattice", set_radius=0.1))

    def test_malformed_values(self) -> None:
        """Values of the wrong type are configuration errors."""
        with self.assertRaises(ConfigurationError):
            parse_config(dict(BASE, cells="many"))
        with self.assertRaises(ConfigurationError):
            parse_config(dict(BASE, refine="yes"))
        with self.assertRaises(ConfigurationError):
            parse_config(dict(BASE, eps=[1.5]))
        with self.assertRaises(ConfigurationError):
            parse_config(dict(BASE, cells=24))
        with self.assertRaises(ConfigurationError):
            parse_config(dict(BASE, config="tree", edges=[[0, 1, 2]]))

    def test_refine_cells(self) -> None:
        """Refinement sizes must be the configured cells times a power of two."""
        cfg = parse_config(dict(BASE, command="sweep", refine_cells=[64, 128]))
        self.assertEqual(cfg.refine_cells, (64, 128))
        for bad in ([32], [48], [96], [16]):
            with self.subTest(refine_cells=bad):
                with self.assertRaisesRegex(ConfigurationError, "refine_cells"):
                    parse_config(dict(BASE, refine_cells=bad))

    def test_overrides_and_digest(self) -> None:
        """Overrides re-parse the config and change the digest."""
        cfg = parse_config(dict(BASE))
        same = parse_config(dict(BASE))
        self.assertEqual(cfg.digest(), same.digest())
        seeded = with_overrides(cfg, seed=7, workers=None)
        self.assertEqual(seeded.seed, 7)
        self.assertEqual(seeded.workers, 1)
        self.assertNotEqual(seeded.digest(), cfg.digest())
        self.assertEqual(echo(seeded)["seed"], 7)


class TestLoadConfig(unittest.TestCase):
    """Config files by suffix."""

    def setUp(self) -> None:
        self.tmpdir = tempfile.TemporaryDirectory()
        self.root = Path(self.tmpdir.name)

    def tearDown(self) -> None:
        self.tmpdir.cleanup()

    def test_toml(self) -> None:
        """TOML files load."""
        path = self.root / "run.toml"
        path.write_text(
            'command = "count"\n'
            "side = 1.0\n"
            "cells = 32\n"
            'set = "strips"\n'
            "set_width = 0.125\n"
            "set_period = 0.25\n"
            "lambdas = [0.125, 0.25]\n"
            "eps = [1.0, 0.5]\n",
            encoding="utf-8",
        )
        cfg = load_config(path)
        self.assertEqual(cfg.set, "strips")
        self.assertEqual(cfg.eps, (1.0, 0.5))
        self.assertAlmostEqual(float(np.mean(cfg.build_field().values)), 0.5)

    def test_json(self) -> None:
        """JSON files load."""
        path = self.root / "run.json"
        path.write_text(json.dumps(BASE), encoding="utf-8")
        self.assertEqual(load_config(path).cells, 32)

    def test_bad_files(self) -> None:
        """Missing, malformed or unsupported files are configuration errors."""
        with self.assertRaises(ConfigurationError):
            load_config(self.root / "missing.toml")
        yaml = self.root / "run.yaml"
        yaml.write_text("side: 1\n", encoding="utf-8")
        with self.assertRaises(ConfigurationError):
            load_config(yaml)
        broken = self.root / "broken.toml"
        broken.write_text("side = = 1\n", encoding="utf-8")
        with self.assertRaises(ConfigurationError):
            load_config(broken)


if __name__ == "__main__":
    unittest.main()
