from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import numpy as np

from ramseyforms.core.errors import ConfigurationError, DimensionError
from ramseyforms.core.grid import Grid, GridField, constant_field, load_field, make_indicator
from ramseyforms.core.kernels import heat_smooth

logger = logging.getLogger(__name__)

SET_KINDS = ("full", "empty", "random", "ball-lattice", "strips", "file")


def random_set(grid: Grid, density: float, seed: int) -> GridField:
    """Each cell is kept independently with probability density."""
    if not 0.0 <= density <= 1.0:
        raise ConfigurationError(f"set_density must lie in [0, 1], got {density!r}")
    rng = np.random.default_rng(seed)
    return GridField(grid, (rng.random(grid.shape) < density).astype(np.float64))


def ball_lattice(grid: Grid, period: float, radius: float) -> GridField:
    """Union of balls of the given radius centred on a square lattice of the given period."""
    if not (period > 0 and radius > 0):
        raise ConfigurationError(f"ball lattice needs positive period and radius, got {period!r}, {radius!r}")
    if abs(grid.side / period - round(grid.side / period)) > 1e-9:
        logger.warning("ball lattice period %.4g does not divide the side %.4g", period, grid.side)

    def _inside(*xs: np.ndarray) -> np.ndarray:
        return sum((np.mod(x, period) - 0.5 * period) ** 2 for x in xs) <= radius * radius

    return make_indicator(grid, _inside)


def smoothed_ball(grid: Grid, radius: float, t: float) -> GridField:
    """Indicator of the ball centred in the box, heat-smoothed at scale t."""
    if not radius > 0:
        raise ConfigurationError(f"ball radius must be positive, got {radius!r}")
    centre = 0.5 * grid.side
    ball = make_indicator(grid, lambda *xs: sum((x - centre) ** 2 for x in xs) <= radius * radius)
    return heat_smooth(ball, t)


def strips(grid: Grid, width: float, period: float, axis: int = 0) -> GridField:
    """Cells whose coordinate along axis, taken modulo period, is below width."""
    if not 0 < width < period:
        raise ConfigurationError(f"strips need 0 < width < period, got width={width!r}, period={period!r}")
    if not 0 <= axis < grid.dim:
        raise ConfigurationError(f"set_axis must lie in 0..{grid.dim - 1}, got {axis!r}")

    def _inside(*xs: np.ndarray) -> np.ndarray:
        return np.mod(xs[axis], period) < width

    return make_indicator(grid, _inside)


def build_set(grid: Grid, kind: str, options: dict[str, Any]) -> GridField:
    """
    Build the set (or bounded function) a run works on.

    :param grid: grid of the run
    :type grid: Grid
    :param kind: one of SET_KINDS
    :type kind: str
    :param options: the set_* keys of the config, without the prefix
    :type options: dict[str, Any]
    :return: the field
    :rtype: GridField
    """
    if kind == "full":
        return constant_field(grid, 1.0)
    if kind == "empty":
        return constant_field(grid, 0.0)
    if kind == "random":
        return random_set(grid, float(options.get("density", 0.5)), int(options.get("seed", 0)))
    if kind == "ball-lattice":
        return ball_lattice(grid, float(options["period"]), float(options["radius"]))
    if kind == "strips":
        return strips(grid, float(options["width"]), float(options["period"]), int(options.get("axis", 0)))
    if kind == "file":
        f = load_field(Path(options["path"]))
        if f.grid != grid:
            raise DimensionError(f"field file grid {f.grid} does not match the configured grid {grid}")
        return f
    raise ConfigurationError(f"unknown set kind {kind!r}; expected one of {', '.join(SET_KINDS)}")
