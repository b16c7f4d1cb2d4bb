from __future__ import annotations

import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ramseyforms.core.errors import DomainError
from ramseyforms.core.grid import Grid, GridField, constant_field
from ramseyforms.core.martingale import (
    BallKernel,
    DyadicFiltration,
    ball_average,
    ball_domination_constant,
    bourgain_lower_margin,
    cond_exp,
    dyadic_tree_minorant,
    induction_chain_margins,
    is_measurable,
    level_for_radius,
    nested_product_margin,
    unit_ball_volume,
)
from ramseyforms.core.sets import random_set


class TestConditionalExpectation(unittest.TestCase):
    """Block averages over the dyadic filtration."""

    def setUp(self) -> None:
        self.grid = Grid(2, 1.0, 16)
        rng = np.random.default_rng(5)
        self.f = GridField(self.grid, rng.random(self.grid.shape))
        self.g = GridField(self.grid, rng.random(self.grid.shape))

    def test_extreme_levels(self) -> None:
        """Level 0 is the mean and the top level is the field."""
        np.testing.assert_allclose(cond_exp(self.f, 0).values, np.mean(self.f.values), atol=1e-12)
        np.testing.assert_allclose(cond_exp(self.f, self.grid.levels).values, self.f.values, atol=1e-12)

    def test_tower_and_pull_out(self) -> None:
        """Tower and pull-out rules hold exactly."""
        np.testing.assert_allclose(cond_exp(cond_exp(self.f, 3), 1).values, cond_exp(self.f, 1).values, atol=1e-12)
        block = cond_exp(self.g, 1)
        np.testing.assert_allclose(
            cond_exp(self.f * block, 1).values, cond_exp(self.f, 1).values * block.values, atol=1e-12
        )

    def test_measurability(self) -> None:
        """Conditional expectations are constant on dyadic cubes."""
        self.assertTrue(is_measurable(cond_exp(self.f, 2), 2, atol=1e-12))
        self.assertTrue(is_measurable(cond_exp(self.f, 2), 3, atol=1e-12))
        self.assertFalse(is_measurable(self.f, 2))

    def test_level_bounds(self) -> None:
        """Levels outside 0..M are rejected."""
        filt = DyadicFiltration(self.grid)
        self.assertEqual(filt.max_level, 4)
        self.assertEqual(filt.block_cells(1), 8)
        self.assertAlmostEqual(filt.block_side(2), 0.25)
        with self.assertRaises(DomainError):
            cond_exp(self.f, 5)
        with self.assertRaises(DomainError):
            cond_exp(self.f, -1)

    def test_level_for_radius(self) -> None:
        """The chosen level has cubes smaller than the radius."""
        self.assertEqual(level_for_radius(self.grid, 0.5), 2)
        self.assertEqual(level_for_radius(self.grid, 0.5, by_diameter=False), 2)
        self.assertEqual(level_for_radius(self.grid, 0.6, by_diameter=False), 1)
        with self.assertRaises(DomainError):
            level_for_radius(self.grid, 0.01)


class TestMartingaleInequalities(unittest.TestCase):
    """Products of conditional expectations against powers of the coarse average."""

    @settings(deadline=None, max_examples=60)
    @given(
        arrays(np.float64, (16,), elements=st.floats(0.0, 1.0, allow_nan=False)),
        st.integers(0, 4),
        st.lists(st.integers(0, 4), min_size=1, max_size=3),
    )
    def test_nested_product_margin(self, values: np.ndarray, m: int, levels: list[int]) -> None:
        """Nested products dominate the product of expectations."""
        f = GridField(Grid(1, 1.0, 16), values)
        self.assertGreaterEqual(nested_product_margin(f, m, levels), -1e-12)

    @settings(deadline=None, max_examples=40)
    @given(
        arrays(np.float64, (8, 8), elements=st.floats(0.0, 1.0, allow_nan=False)),
        st.integers(0, 3),
        st.lists(st.integers(0, 3), min_size=1, max_size=3),
    )
    def test_induction_chain(self, values: np.ndarray, m: int, raw_levels: list[int]) -> None:
        """Every step of the induction chain has a nonnegative margin."""
        f = GridField(Grid(2, 1.0, 8), values)
        levels = [max(m, x) for x in raw_levels]
        res = induction_chain_margins(f, m, levels)
        self.assertEqual(len(res["steps"]), len(levels))
        self.assertGreaterEqual(res["min_margin"], -1e-12)
        self.assertLess(res["closing_residual"], 1e-12)

    def test_induction_chain_needs_fine_levels(self) -> None:
        """Levels coarser than m are rejected."""
        f = constant_field(Grid(1, 1.0, 16), 0.5)
        with self.assertRaises(DomainError):
            induction_chain_margins(f, 2, [1, 3])
        with self.assertRaises(DomainError):
            induction_chain_margins(f, 2, [])

    def test_negative_fields_are_rejected(self) -> None:
        """The product inequalities need nonnegative fields."""
        f = constant_field(Grid(1, 1.0, 16), -0.1)
        with self.assertRaises(DomainError):
            nested_product_margin(f, 0, [1])


class TestBallAverages(unittest.TestCase):
    """Ball kernels, the cube-in-ball domination and the lower bound for sets."""

    def test_domination_constants(self) -> None:
        """Domination constants match the closed form."""
        self.assertAlmostEqual(unit_ball_volume(2), math.pi)
        self.assertAlmostEqual(ball_domination_constant(1), 0.25)
        self.assertAlmostEqual(ball_domination_constant(2), 1.0 / (8.0 * math.pi))

    def test_ball_kernel(self) -> None:
        """Ball kernels have mass 1 and whole cells inside the ball."""
        grid = Grid(2, 1.0, 32)
        k = BallKernel(2, 0.2).field(grid)
        self.assertAlmostEqual(float(np.sum(k.values)) * grid.cell_volume, 1.0)
        with self.assertRaises(DomainError):
            BallKernel(2, 0.01).field(grid)
        with self.assertRaises(DomainError):
            BallKernel(3, 0.2).field(grid)

    def test_ball_average_dominates_block_average(self) -> None:
        """Ball averages dominate c_d times block averages."""
        grid = Grid(2, 1.0, 32)
        f = random_set(grid, 0.4, seed=3)
        for t in (0.1, 0.2, 0.4):
            with self.subTest(t=t):
                lower = ball_domination_constant(2) * cond_exp(f, level_for_radius(grid, t)).values
                self.assertGreaterEqual(float(np.min(ball_average(f, t).values - lower)), -1e-12)

    def test_lower_bound_for_sets(self) -> None:
        """The product lower bound holds for sets."""
        grid = Grid(2, 1.0, 32)
        f = random_set(grid, 0.5, seed=8)
        res = bourgain_lower_margin(f, [0.1, 0.3])
        self.assertGreaterEqual(res["margin"], 0.0)
        self.assertEqual(len(res["levels"]), 2)
        with self.assertRaises(DomainError):
            bourgain_lower_margin(f, [0.9])
        with self.assertRaises(DomainError):
            bourgain_lower_margin(constant_field(grid, 2.0), [0.1])

    def test_minorant_without_children_is_f(self) -> None:
        """A leaf-only tree minorant is f itself."""
        grid = Grid(2, 1.0, 16)
        f = random_set(grid, 0.5, seed=1)
        np.testing.assert_array_equal(dyadic_tree_minorant(f, {}, 0).values, f.values)
        folded = dyadic_tree_minorant(f, {0: [(1, 0, 2.0)]}, 0)
        np.testing.assert_allclose(folded.values, 2.0 * f.values * np.mean(f.values))


if __name__ == "__main__":
    unittest.main()
