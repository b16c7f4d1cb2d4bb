from __future__ import annotations

import unittest

from ramseyforms.core.errors import DomainError
from ramseyforms.core.suites import DEFAULT_SUITES, SUITES, SuiteContext, run_suite


class TestSuites(unittest.TestCase):
    """Verification suites on a reduced context."""

    def setUp(self) -> None:
        self.ctx = SuiteContext(trials=20, samples=1000, seed=0)

    def _check(self, name: str) -> list[dict]:
        records = run_suite(name, self.ctx)
        self.assertGreater(len(records), 0)
        for r in records:
            with self.subTest(suite=name, check=r["check"]):
                self.assertEqual(set(r), {"suite", "check", "value", "limit", "passed", "details"})
                self.assertEqual(r["suite"], name)
                self.assertTrue(r["passed"], r)
        return records

    def test_every_suite_passes(self) -> None:
        """Each registered suite passes every one of its checks."""
        for name in SUITES:
            with self.subTest(suite=name):
                self._check(name)

    def test_covering(self) -> None:
        """The covering suite reports the multiplicity check by name."""
        checks = [r["check"] for r in self._check("covering")]
        self.assertIn("max multiplicity", checks)

    def test_uniform_scaling_floors(self) -> None:
        """Slopes clear a/2 - 0.15 for both exponents."""
        records = self._check("uniform-scaling")
        self.assertEqual([r["check"] for r in records], ["slope a=1", "slope a=2"])
        for r, a in zip(records, (1.0, 2.0)):
            self.assertAlmostEqual(r["limit"], a / 2.0 - 0.15)
            self.assertGreaterEqual(r["value"], r["limit"])

    def test_registry(self) -> None:
        """The default run covers every suite; unknown names are rejected."""
        self.assertEqual(DEFAULT_SUITES, tuple(SUITES))
        self.assertIn("uniform-scaling", DEFAULT_SUITES)
        with self.assertRaises(DomainError):
            run_suite("nope", self.ctx)

    def test_streams_are_deterministic(self) -> None:
        """Suite random streams depend only on the seed and stream id."""
        a = self.ctx.rng(3).random(4)
        b = SuiteContext(trials=20, samples=1000, seed=0).rng(3).random(4)
        self.assertEqual(a.tolist(), b.tolist())
        self.assertNotEqual(a.tolist(), self.ctx.rng(4).random(4).tolist())


if __name__ == "__main__":
    unittest.main()
