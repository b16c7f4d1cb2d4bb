from __future__ import annotations

import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ramseyforms.core.errors import ConfigurationError, DimensionError, DomainError
from ramseyforms.core.grid import (
    Grid,
    GridField,
    constant_field,
    convolve,
    delta_field,
    inverse_spectrum,
    load_field,
    lp_norm,
    make_indicator,
    mean,
    save_field,
    spectrum,
)


class TestGrid(unittest.TestCase):
    """Grid geometry, fields and the periodic transforms."""

    def test_rejects_invalid_geometry(self) -> None:
        """Non-positive sides and non-power-of-two cells are rejected."""
        for dim, side, cells in ((0, 1.0, 8), (5, 1.0, 8), (2, 0.0, 8), (2, -1.0, 8), (2, 1.0, 6), (2, 1.0, 2)):
            with self.subTest(dim=dim, side=side, cells=cells):
                with self.assertRaises(ConfigurationError):
                    Grid(dim, side, cells)

    def test_spacing_and_levels(self) -> None:
        """Spacing and dyadic levels follow from side and cells."""
        g = Grid(2, 3.0, 16)
        self.assertAlmostEqual(g.spacing, 3.0 / 16)
        self.assertEqual(g.levels, 4)
        self.assertEqual(g.shape, (16, 16))
        self.assertEqual(g.refined().cells, 32)

    def test_displacements_wrap_around_origin(self) -> None:
        """Index 0 is the origin and every displacement lies in [-R/2, R/2)."""
        g = Grid(1, 2.0, 8)
        (x,) = g.displacements()
        self.assertEqual(float(x[0]), 0.0)
        self.assertTrue(np.all(x >= -1.0) and np.all(x < 1.0))
        self.assertAlmostEqual(float(x[-1]), -0.25)

    def test_field_shape_and_finiteness(self) -> None:
        """Fields must match the grid shape and be finite."""
        g = Grid(2, 1.0, 4)
        with self.assertRaises(DimensionError):
            GridField(g, np.zeros((4, 8)))
        bad = np.zeros((4, 4))
        bad[0, 0] = np.nan
        with self.assertRaises(DomainError):
            GridField(g, bad)

    def test_field_values_are_read_only(self) -> None:
        """Field values cannot be written in place."""
        f = constant_field(Grid(1, 1.0, 8), 2.0)
        with self.assertRaises(ValueError):
            f.values[0] = 1.0

    def test_arithmetic_needs_matching_grids(self) -> None:
        """Arithmetic across grids is rejected."""
        a = constant_field(Grid(1, 1.0, 8), 1.0)
        b = constant_field(Grid(1, 2.0, 8), 1.0)
        with self.assertRaises(DimensionError):
            _ = a + b
        self.assertEqual(mean(a * 3.0), 3.0)

    def test_lp_norm_of_constant(self) -> None:
        """Lp norms of constants scale with the volume."""
        g = Grid(2, 2.0, 8)
        f = constant_field(g, -3.0)
        self.assertAlmostEqual(lp_norm(f, 1), 3.0 * 4.0)
        self.assertAlmostEqual(lp_norm(f, 2), math.sqrt(9.0 * 4.0))
        self.assertEqual(lp_norm(f, math.inf), 3.0)
        with self.assertRaises(DomainError):
            lp_norm(f, 0.5)

    def test_convolve_with_delta_is_identity(self) -> None:
        """Convolving with the delta leaves a field unchanged."""
        g = Grid(2, 1.0, 16)
        rng = np.random.default_rng(1)
        f = GridField(g, rng.random(g.shape))
        out = convolve(f, delta_field(g))
        np.testing.assert_allclose(out.values, f.values, atol=1e-12)

    def test_convolve_rejects_mismatched_grids(self) -> None:
        """Convolution needs one grid."""
        with self.assertRaises(DimensionError):
            convolve(constant_field(Grid(2, 1.0, 8), 1.0), constant_field(Grid(2, 1.0, 16), 1.0))

    @settings(deadline=None, max_examples=50)
    @given(arrays(np.float64, (8, 8), elements=st.floats(-1.0, 1.0, allow_nan=False)))
    def test_parseval(self, values: np.ndarray) -> None:
        """‖f‖²₂ equals R^{-d} Σ|f̂|² for the h^d-normalised spectrum."""
        g = Grid(2, 3.0, 8)
        f = GridField(g, values)
        lhs = lp_norm(f, 2) ** 2
        rhs = float(np.sum(np.abs(spectrum(f).values) ** 2)) / g.side**g.dim
        self.assertTrue(math.isclose(lhs, rhs, rel_tol=1e-10, abs_tol=1e-12))

    def test_spectrum_at_zero_is_integral(self) -> None:
        """The zero mode of the spectrum is the integral."""
        g = Grid(2, 2.0, 8)
        f = constant_field(g, 0.5)
        F = spectrum(f)
        self.assertAlmostEqual(F.values[0, 0].real, 0.5 * 4.0)
        np.testing.assert_allclose(inverse_spectrum(F).values, f.values, atol=1e-12)

    def test_refined_preserves_integrals(self) -> None:
        """Cell replication keeps integrals."""
        g = Grid(2, 1.0, 16)
        f = make_indicator(g, lambda x, y: (x - 0.5) ** 2 + (y - 0.5) ** 2 <= 0.1)
        fine = f.refined()
        self.assertEqual(fine.cells, 32)
        self.assertAlmostEqual(mean(fine), mean(f))
        self.assertAlmostEqual(lp_norm(fine, 2), lp_norm(f, 2))
        self.assertTrue(fine.is_indicator())


class TestFieldFiles(unittest.TestCase):
    """Binary and JSON field files."""

    def setUp(self) -> None:
        self.tmpdir = tempfile.TemporaryDirectory()
        self.root = Path(self.tmpdir.name)
        g = Grid(2, 1.5, 8)
        self.field = GridField(g, np.random.default_rng(7).random(g.shape))

    def tearDown(self) -> None:
        self.tmpdir.cleanup()

    def test_binary_file(self) -> None:
        """Binary field files round-trip exactly."""
        path = self.root / "f.bin"
        save_field(path, self.field)
        self.assertEqual(path.read_bytes()[:4], b"RFGF")
        back = load_field(path)
        self.assertEqual(back.grid, self.field.grid)
        np.testing.assert_array_equal(back.values, self.field.values)

    def test_json_file(self) -> None:
        """JSON field files round-trip exactly."""
        path = self.root / "f.json"
        save_field(path, self.field)
        back = load_field(path)
        self.assertEqual(back.grid, self.field.grid)
        np.testing.assert_array_equal(back.values, self.field.values)

    def test_unknown_suffix_and_magic(self) -> None:
        """Unknown suffixes and bad magic bytes are rejected."""
        with self.assertRaises(ConfigurationError):
            save_field(self.root / "f.npy", self.field)
        junk = self.root / "junk.bin"
        junk.write_bytes(b"XXXX" + bytes(32))
        with self.assertRaises(ConfigurationError):
            load_field(junk)

    def test_truncated_binary_file(self) -> None:
        """Short header or missing values raise ConfigurationError naming the file."""
        path = self.root / "f.bin"
        save_field(path, self.field)
        data = path.read_bytes()
        for size in (12, len(data) - 8):
            with self.subTest(size=size):
                cut = self.root / f"cut{size}.bin"
                cut.write_bytes(data[:size])
                with self.assertRaisesRegex(ConfigurationError, f"cut{size}.bin"):
                    load_field(cut)


if __name__ == "__main__":
    unittest.main()
