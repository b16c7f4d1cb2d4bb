from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy import special

from ramseyforms.core.errors import DomainError
from ramseyforms.core.grid import Grid, GridField, convolve
from ramseyforms.core.kernels import is_resolved

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DyadicFiltration:
    """
    Dyadic filtration of a grid: level m is generated by the 2^{dm} congruent cubes of side
    2^{-m}R, for 0 <= m <= log2(N).
    """

    grid: Grid

    @property
    def max_level(self) -> int:
        return self.grid.levels

    def check_level(self, m: int) -> None:
        if not (isinstance(m, (int, np.integer)) and 0 <= m <= self.max_level):
            raise DomainError(f"level must be an integer in 0..{self.max_level}, got {m!r}")

    def block_side(self, m: int) -> float:
        self.check_level(m)
        return self.grid.side / 2**m

    def block_cells(self, m: int) -> int:
        self.check_level(m)
        return self.grid.cells >> m

    def expect(self, values: np.ndarray, m: int) -> np.ndarray:
        """Block averages of a raw array, broadcast back to the full shape."""
        self.check_level(m)
        d = self.grid.dim
        blocks = 2**m
        b = self.grid.cells >> m
        split = values.reshape(sum(((blocks, b) for _ in range(d)), ()))
        inner = tuple(range(1, 2 * d, 2))
        means = split.mean(axis=inner, keepdims=True)
        return np.broadcast_to(means, split.shape).reshape(self.grid.shape)


def cond_exp(f: GridField, m: int) -> GridField:
    """E(f | G_m): the average of f over the level-m cube containing each cell."""
    return GridField(f.grid, DyadicFiltration(f.grid).expect(f.values, m))


def is_measurable(f: GridField, m: int, atol: float = 0.0) -> bool:
    """True when f is constant on every level-m cube."""
    return bool(np.all(np.abs(cond_exp(f, m).values - f.values) <= atol))


def level_for_radius(grid: Grid, t: float, by_diameter: bool = True) -> int:
    """
    Smallest level m whose cubes fit the scale t: 2^{-m}R·√d < t (diameter rule), or
    2^{-m}R < t when by_diameter is False.

    :raises DomainError: when no level up to log2(N) qualifies
    """
    width = math.sqrt(grid.dim) if by_diameter else 1.0
    for m in range(grid.levels + 1):
        if grid.side / 2**m * width < t:
            return m
    raise DomainError(f"scale {t:.4g} is below the finest dyadic level of the grid (spacing {grid.spacing:.4g})")


def unit_ball_volume(dim: int) -> float:
    return float(math.pi ** (dim / 2.0) / special.gamma(dim / 2.0 + 1.0))


def ball_domination_constant(dim: int) -> float:
    """c_d = ((2√d)^d·v_d)^{-1}, so that f*φ_t >= c_d·E(f | G_{m_t}) cellwise."""
    return 1.0 / ((2.0 * math.sqrt(dim)) ** dim * unit_ball_volume(dim))


@dataclass(frozen=True)
class BallKernel:
    """
    φ_t = |B(0,t)|^{-1}·1_{B(0,t)}, discretised as the displacements whose whole cell lies inside
    the ball (|y| + h√d/2 <= t), renormalised to mass 1.
    """

    dim: int
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DomainError(f"ball radius must be positive, got {self.radius!r}")

    def field(self, grid: Grid) -> GridField:
        if grid.dim != self.dim:
            raise DomainError(f"ball kernel of dimension {self.dim} on a {grid.dim}-dimensional grid")
        half_diag = 0.5 * grid.spacing * math.sqrt(grid.dim)
        mask = grid.radius() + half_diag <= self.radius * (1.0 + 1e-12)
        count = int(np.count_nonzero(mask))
        if count == 0:
            raise DomainError(f"ball of radius {self.radius:.4g} contains no whole grid cell")
        meta = {"radius": self.radius, "support": count, "under_resolved": not is_resolved(self.radius, grid)}
        return GridField(grid, mask / (count * grid.cell_volume), meta)


def ball_average(f: GridField, t: float) -> GridField:
    """f * φ_t with the cell-inclusion ball kernel."""
    kernel = BallKernel(f.dim, t).field(f.grid)
    if kernel.meta["under_resolved"]:
        logger.warning("ball radius %.4g is under-resolved (%.2f cells)", t, t / f.grid.spacing)
    out = convolve(f, kernel)
    return GridField(f.grid, out.values, dict(kernel.meta))


def _check_nonnegative(f: GridField) -> None:
    if np.any(f.values < 0):
        raise DomainError("the martingale inequalities need a nonnegative f")


def nested_product_margin(f: GridField, m: int, levels: Sequence[int]) -> float:
    """
    min over cells of E_m(f·Π E_{m_i} f) - (Π_{m_i<m} E_{m_i} f)·(E_m f)^{n+1-N}, N = #{m_i < m}.

    :param f: nonnegative bounded field
    :type f: GridField
    :param m: outer level
    :type m: int
    :param levels: inner levels m_1..m_n
    :type levels: Sequence[int]
    :return: the cellwise minimum margin; nonnegative up to rounding
    :rtype: float
    """
    _check_nonnegative(f)
    filt = DyadicFiltration(f.grid)
    filt.check_level(m)
    v = f.values
    product = v.copy()
    coarse = np.ones_like(v)
    n_coarse = 0
    for mi in levels:
        e = filt.expect(v, mi)
        product = product * e
        if mi < m:
            coarse = coarse * e
            n_coarse += 1
    lhs = filt.expect(product, m)
    rhs = coarse * filt.expect(v, m) ** (len(levels) + 1 - n_coarse)
    return float(np.min(lhs - rhs))


def induction_chain_margins(f: GridField, m: int, levels: Sequence[int]) -> dict[str, Any]:
    """
    Replays the induction behind E_m(f·Π E_{m_i} f) >= (E_m f)^{n+1} for m <= min m_i.

    With the levels sorted, L_k = E_m((Π_{i<=k} E_{m_i} f)·(E_{m_{k+1}} f)^{n+1-k}) for
    k = 0..n-1. The chain is (E_m f)^{n+1} <= L_0 <= L_1 <= ... <= L_{n-1} = E_m(f·Π E_{m_i} f).

    :return: cellwise minimum margin of every link ("steps") and the closing equality residual
    :rtype: dict[str, Any]
    """
    _check_nonnegative(f)
    filt = DyadicFiltration(f.grid)
    filt.check_level(m)
    ordered = sorted(int(x) for x in levels)
    if not ordered:
        raise DomainError("the induction chain needs at least one inner level")
    if ordered[0] < m:
        raise DomainError(f"inner levels must be >= the outer level {m}, got {ordered}")
    n = len(ordered)
    v = f.values
    cond = [filt.expect(v, mi) for mi in ordered]

    chain = []
    for k in range(n):
        prefix = np.prod(cond[:k], axis=0) if k else np.ones_like(v)
        chain.append(filt.expect(prefix * cond[k] ** (n + 1 - k), m))
    bottom = filt.expect(v, m) ** (n + 1)
    full = filt.expect(v * np.prod(cond, axis=0), m)

    steps = [float(np.min(chain[0] - bottom))]
    steps.extend(float(np.min(chain[k] - chain[k - 1])) for k in range(1, n))
    return {
        "levels": ordered,
        "steps": steps,
        "closing_residual": float(np.max(np.abs(full - chain[-1]))),
        "min_margin": min(steps),
    }


def bourgain_lower_margin(f: GridField, scales: Sequence[float]) -> dict[str, Any]:
    """
    ⨍ f·Π(f*φ_{t_k}) - c_d^n·(⨍ f)^{n+1} for f with values in [0, 1].

    :param scales: t_1..t_n, each within [2 cells, R/2]
    :type scales: Sequence[float]
    :return: margin, both sides, c_d and the dyadic levels m_k
    :rtype: dict[str, Any]
    """
    if np.any(f.values < 0) or np.any(f.values > 1):
        raise DomainError("f must take values in [0, 1]")
    grid = f.grid
    for t in scales:
        if not (2.0 * grid.spacing <= t <= grid.side / 2):
            raise DomainError(f"scale {t:.4g} outside [2 cells, R/2] = [{2 * grid.spacing:.4g}, {grid.side / 2:.4g}]")
    integrand = f.values.copy()
    for t in scales:
        integrand = integrand * ball_average(f, t).values
    lhs = float(np.mean(integrand))
    c_d = ball_domination_constant(grid.dim)
    rhs = c_d ** len(scales) * float(np.mean(f.values)) ** (len(scales) + 1)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "margin": lhs - rhs,
        "constant": c_d,
        "levels": [level_for_radius(grid, t) for t in scales],
    }


def dyadic_tree_minorant(f: GridField, children: dict[int, list[tuple[int, int, float]]], root: int) -> GridField:
    """
    Dyadic lower bound of the tree operator: D_v = f·Π_i κ_i·E_{l_i}(D_{child_i}).

    :param f: nonnegative field on the plane
    :type f: GridField
    :param children: vertex -> list of (child vertex, level l_i, weight κ_i)
    :type children: dict[int, list[tuple[int, int, float]]]
    :param root: the root vertex
    :type root: int
    :return: D at the root
    :rtype: GridField
    """
    _check_nonnegative(f)
    filt = DyadicFiltration(f.grid)

    def _fold(v: int) -> np.ndarray:
        out = f.values.copy()
        for child, level, weight in children.get(v, []):
            out = out * (weight * filt.expect(_fold(child), level))
        return out

    return GridField(f.grid, _fold(root))
