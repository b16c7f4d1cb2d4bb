from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from ramseyforms.core.counting import (
    BoxSpec,
    SimplexSpec,
    TreeSpec,
    box_form,
    box_form_bruteforce,
    count_boxes,
    count_simplex_mc,
    count_tree,
    nested_simplex_form,
    reference_count,
    structured_box_lower,
    structured_tree_lower,
    tree_form,
    tree_form_bruteforce,
)
from ramseyforms.core.errors import DomainError
from ramseyforms.core.grid import Grid, GridField, constant_field, make_indicator
from ramseyforms.core.kernels import (
    AnisotropyParams,
    DilationLaw,
    KernelKind,
    heat_flow_residual,
    heat_smooth,
    sample_kernel,
    verify_convolution_identities,
)
from ramseyforms.core.martingale import (
    ball_average,
    ball_domination_constant,
    bourgain_lower_margin,
    cond_exp,
    induction_chain_margins,
    level_for_radius,
    nested_product_margin,
)
from ramseyforms.core.multiscale import (
    QuadratureSpec,
    ScaleLadder,
    covering_multiplicity,
    doubling_ok,
    error_form,
    square_identity,
    theta_interval_mass,
    uniform_scaling_slope,
    verify_theta_identity,
)
from ramseyforms.core.sets import random_set, smoothed_ball, strips
from ramseyforms.core.spherical import annulus_field, decay_margin, sphere_fourier, sphere_fourier_quadrature

logger = logging.getLogger(__name__)

IDENTITY_CELLS = 256
UNIFORM_CELLS = 1024
ORACLE_CELLS = 8
ORACLE_CASES = 20
ORACLE_RTOL = 1e-8
EXACT_TOL = 1e-12


@dataclass(frozen=True)
class SuiteContext:
    side: float = 1.0
    trials: int = 1000
    samples: int = 1000
    seed: int = 0
    workers: int = 1

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(stream,)))


def _record(suite: str, check: str, value: float, limit: float, passed: bool, **details: Any) -> dict[str, Any]:
    return {
        "suite": suite,
        "check": check,
        "value": float(value),
        "limit": float(limit),
        "passed": bool(passed),
        "details": details,
    }


def _below(suite: str, check: str, value: float, limit: float, **details: Any) -> dict[str, Any]:
    return _record(suite, check, value, limit, value < limit, **details)


def _above(suite: str, check: str, value: float, limit: float, **details: Any) -> dict[str, Any]:
    return _record(suite, check, value, limit, value >= limit, **details)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------- kernels


def gaussian_identities(ctx: SuiteContext) -> list[dict[str, Any]]:
    grid = Grid(2, ctx.side, IDENTITY_CELLS)
    h = grid.spacing
    out = []
    for alpha_cells, beta_cells in ((5, 7), (6, 6), (4, 9), (8, 5), (10, 12)):
        res = verify_convolution_identities(alpha_cells * h, beta_cells * h, grid)
        for key in ("gauss_gauss", "deriv_deriv", "laplacian_gauss"):
            out.append(_below("gaussian-identities", key, res[key], 1e-6, alpha=res["alpha"], beta=res["beta"]))
    return out


def heat_flow(ctx: SuiteContext) -> list[dict[str, Any]]:
    grid = Grid(2, ctx.side, IDENTITY_CELLS)
    target = 10.0 * grid.spacing
    out = []
    for a, b in ((1.0, 1.0), (2.0, 1.0), (1.5, 0.7)):
        law = DilationLaw(a, b)
        t = (target / b) ** (1.0 / a)
        residuals = [heat_flow_residual(law, t, grid, r * t) for r in (2e-3, 1e-3, 5e-4)]
        out.append(_below("heat-flow", f"residual a={a:g} b={b:g}", residuals[0], 1e-4, t=t, residuals=residuals))
        converges = all(_quadratic(c, f) for c, f in zip(residuals, residuals[1:]))
        ratios = [c / f if f > 0 else math.inf for c, f in zip(residuals, residuals[1:])]
        out.append(_record("heat-flow", f"dt² convergence a={a:g} b={b:g}", min(ratios), 3.0, converges, ratios=ratios))
    return out


def _quadratic(coarse: float, fine: float) -> bool:
    return fine < 1e-10 or coarse / fine >= 3.0


# ---------------------------------------------------------------- spherical


def fourier_decay(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(3)
    worst2 = 0.0
    for _ in range(20):
        direction = rng.standard_normal(2)
        xi = direction / np.linalg.norm(direction) * rng.uniform(0.0, 50.0)
        r = rng.uniform(0.5, 2.0)
        worst2 = max(worst2, abs(sphere_fourier(2, r, xi) - sphere_fourier_quadrature(r, xi)))
    rho = np.linspace(1e-3, 50.0, 1001)
    closed = np.sin(2.0 * math.pi * rho) / (2.0 * math.pi * rho)
    worst3 = float(np.max(np.abs(sphere_fourier(3, 1.0, rho[:, None] * np.array([[0.0, 0.0, 1.0]])) - closed)))
    out = [
        _below("fourier-decay", "d=2 vs angular quadrature", worst2, 1e-8),
        _below("fourier-decay", "d=3 vs closed form", worst3, EXACT_TOL),
    ]
    for d in (2, 3):
        coarse = decay_margin(d)
        fine = decay_margin(d, np.linspace(0.0, 1e3, 400_001))
        out.append(_below("fourier-decay", f"decay constant d={d}", coarse, 2.0))
        out.append(_below("fourier-decay", f"decay constant drift d={d}", abs(fine - coarse) / coarse, 0.01))
    return out


# ---------------------------------------------------------------- martingale


def _random_levels(rng: np.random.Generator, top: int, count: int, low: int = 0) -> list[int]:
    return [int(x) for x in rng.integers(low, top + 1, size=count)]


def martingale(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(4)
    grids = {1: Grid(1, ctx.side, 64), 2: Grid(2, ctx.side, 16)}
    exact = 0.0
    for d, grid in grids.items():
        for _ in range(10):
            f = GridField(grid, rng.random(grid.shape))
            g = GridField(grid, rng.random(grid.shape))
            top = grid.levels
            m0, m1 = sorted(_random_levels(rng, top, 2))
            block = cond_exp(g, m0)
            checks = [
                np.abs(cond_exp(f, 0).values - np.mean(f.values)),
                np.abs(cond_exp(f, top).values - f.values),
                np.abs(cond_exp(cond_exp(f, m1), m0).values - cond_exp(f, m0).values),
                np.abs(cond_exp(f * block, m0).values - cond_exp(f, m0).values * block.values),
                np.abs(cond_exp(f + g, m1).values - cond_exp(f, m1).values - cond_exp(g, m1).values),
            ]
            exact = max(exact, max(float(np.max(c)) for c in checks))
            for p in (2, 3, 4):
                jensen = cond_exp(GridField(grid, f.values**p), m0).values - cond_exp(f, m0).values ** p
                exact = max(exact, max(0.0, -float(np.min(jensen))))
    out = [_below("martingale", "conditional expectation identities", exact, EXACT_TOL)]

    violations = 0
    chain_violations = 0
    worst = math.inf
    for _ in range(ctx.trials):
        d = int(rng.integers(1, 3))
        grid = grids[d]
        n = int(rng.integers(1, 4))
        f = GridField(grid, rng.random(grid.shape))
        m = int(rng.integers(0, grid.levels + 1))
        levels = _random_levels(rng, grid.levels, n)
        margin = nested_product_margin(f, m, levels)
        scale = float(np.max(f.values)) ** (n + 1)
        worst = min(worst, margin / scale)
        violations += margin < -1e-10 * scale
        chain = induction_chain_margins(f, m, _random_levels(rng, grid.levels, n, low=m))
        chain_violations += chain["min_margin"] < -1e-10 * scale or chain["closing_residual"] > 1e-10 * scale
    out.append(_record("martingale", "nested product violations", violations, 0, violations == 0, worst_relative_margin=worst))
    out.append(_record("martingale", "induction chain violations", chain_violations, 0, chain_violations == 0))

    bourgain = 0
    domination = 0
    trials = max(1, ctx.trials // 5)
    lower_grids = {1: Grid(1, ctx.side, 128), 2: Grid(2, ctx.side, 32)}
    for _ in range(trials):
        d = int(rng.integers(1, 3))
        grid = lower_grids[d]
        n = int(rng.integers(1, 4))
        f = random_set(grid, float(rng.uniform(0.1, 0.9)), int(rng.integers(0, 2**31)))
        ts = [float(rng.uniform(2.0 * grid.spacing, grid.side / 2)) for _ in range(n)]
        res = bourgain_lower_margin(f, ts)
        bourgain += res["margin"] < -1e-9
        t = ts[0]
        lower = ball_domination_constant(d) * cond_exp(f, level_for_radius(grid, t)).values
        domination += float(np.min(ball_average(f, t).values - lower)) < -1e-10
    out.append(_record("martingale", "lower bound violations", bourgain, 0, bourgain == 0, trials=trials))
    out.append(_record("martingale", "ball domination violations", domination, 0, domination == 0, trials=trials))
    return out


# ---------------------------------------------------------------- counting


def _random_kernel(grid: Grid, rng: np.random.Generator) -> GridField:
    return GridField(grid, rng.random(grid.shape) / (grid.size * grid.cell_volume))


def _annulus(grid: Grid, rng: np.random.Generator) -> GridField:
    return annulus_field(grid, float(rng.uniform(1.5, 3.0)) * grid.spacing, 1.0)


def _random_tree(params: AnisotropyParams, rng: np.random.Generator, star: bool) -> TreeSpec:
    base = TreeSpec.star(params) if star else TreeSpec.path(params)
    edges = tuple((v, u) if rng.random() < 0.5 else (u, v) for u, v in base.edges)
    return TreeSpec(base.vertices, edges, params, int(rng.integers(0, base.vertices)))


def counting_oracles(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(5)
    out = []
    cases: dict[str, list[float]] = {}

    def _case(name: str, fast: float, oracle: float) -> None:
        cases.setdefault(name, []).append(_rel(fast, oracle))

    for _ in range(ORACLE_CASES):
        for dims in ((2,), (2, 2), (1, 2)):
            grid = Grid(sum(dims), ctx.side, ORACLE_CELLS)
            f = GridField(grid, rng.random(grid.shape))
            for label, make in (("random kernels", _random_kernel), ("annulus", _annulus)):
                kernels = [make(grid.with_dim(p), rng) for p in dims]
                _case(f"box {dims} {label}", box_form(f, kernels, dims, coverage=1.0), box_form_bruteforce(f, kernels, dims))
        plane = Grid(2, ctx.side, ORACLE_CELLS)
        f = GridField(plane, rng.random(plane.shape))
        for shape, params in (("path", AnisotropyParams((1.0, 2.0), (1.0, 1.0))), ("star", AnisotropyParams((1.0,) * 3, (1.0,) * 3))):
            spec = _random_tree(params, rng, star=shape == "star")
            for label, make in (("random kernels", _random_kernel), ("annulus", _annulus)):
                kernels = [make(plane, rng) for _ in spec.edges]
                _case(f"tree {shape} {label}", tree_form(f, spec, kernels), tree_form_bruteforce(f, spec, kernels))
    for name, errs in cases.items():
        out.append(_below("counting-oracles", name, max(errs), ORACLE_RTOL, cases=len(errs)))

    grid = Grid(2, ctx.side, 64)
    full = constant_field(grid, 1.0)
    lam = 8.0 * grid.spacing
    ref = reference_count(grid)
    params1 = AnisotropyParams((1.0,), (1.0,))
    params2 = AnisotropyParams((1.0, 2.0), (1.0, 1.0 / lam))
    for eps in (1.0, 0.5, 0.0):
        out.append(_below("counting-oracles", f"full set box ε={eps:g}", _rel(count_boxes(full, BoxSpec(params1), lam, eps), ref), 1e-8))
        out.append(_below("counting-oracles", f"full set tree ε={eps:g}", _rel(count_tree(full, TreeSpec.path(params2), lam, eps), ref), 1e-8))
    return out


def simplex_representation(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(6)
    grid = Grid(3, ctx.side, 16)
    out = []
    for case in range(10):
        f = heat_smooth(GridField(grid, rng.random(grid.shape)), 2.0 * grid.spacing)
        angle = float(rng.uniform(0.3, math.pi - 0.3))
        directions = ((1.0, 0.0), (math.cos(angle), math.sin(angle)))
        a = tuple(float(x) for x in rng.choice([1.0, 2.0], size=2))
        b = tuple(float(rng.uniform(0.1, 0.25)) * ctx.side for _ in range(2))
        spec = SimplexSpec(directions, AnisotropyParams(a, b))
        eps = float(rng.uniform(0.3, 1.0))
        seed = ctx.seed + case
        mc = count_simplex_mc(f, spec, 1.0, eps, ctx.samples, seed, ctx.workers)
        nested = nested_simplex_form(f, spec, 1.0, eps, ctx.samples, seed, ctx.workers)
        combined = math.hypot(mc.stderr, nested.stderr)
        gap = abs(mc.estimate - nested.estimate)
        out.append(_record("simplex-representation", f"case {case}", gap, 3.0 * combined, gap <= 3.0 * combined + 1e-12,
                           mc=mc.estimate, nested=nested.estimate, stderr=combined))
    return out


# ---------------------------------------------------------------- multiscale


def _test_functions(grid: Grid, rng: np.random.Generator) -> dict[str, GridField]:
    R = grid.side
    return {
        "smooth random": heat_smooth(GridField(grid, rng.random(grid.shape)), 3.0 * grid.spacing),
        "ball": make_indicator(grid, lambda *xs: sum((x - 0.5 * R) ** 2 for x in xs) <= (0.25 * R) ** 2),
        "strips": strips(grid, R / 8, R / 4),
        "random set": random_set(grid, 0.3, int(rng.integers(0, 2**31))),
        "gaussian bump": sample_kernel(KernelKind.gauss(), 0.1 * R, grid),
    }


def square_identity_suite(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(7)
    grid = Grid(2, ctx.side, 64)
    quad = QuadratureSpec()
    pairs = ((1.0, 1.0), (2.0, 1.0), (1.5, 0.7), (0.5, 2.0), (3.0, 0.5))
    out = []
    for (name, f), (a, b) in zip(_test_functions(grid, rng).items(), pairs):
        coarse = square_identity(f, a, b, quad)
        fine = square_identity(f, a, b, quad.doubled())
        label = f"{name} a={a:g} b={b:g}"
        out.append(_below("square-identity", label, coarse["residual"], 0.01, residual_plain=coarse["residual_plain"]))
        out.append(_record("square-identity", f"{label} doubling", fine["residual"], 0.7 * coarse["residual"],
                           doubling_ok(coarse["residual"], fine["residual"])))
    return out


def theta_identity(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(8)
    quad = QuadratureSpec()
    out = []
    plane = Grid(2, ctx.side, 64)
    product = Grid(4, ctx.side, 16)
    cases = [
        ("n=1", heat_smooth(GridField(plane, rng.random(plane.shape)), 2.0 * plane.spacing), AnisotropyParams((1.0,), (1.0,)), (1.0,), 0.01),
        ("n=1 set", random_set(plane, 0.4, int(rng.integers(0, 2**31))), AnisotropyParams((2.0,), (0.5,)), (1.5,), 0.01),
        ("n=2", heat_smooth(GridField(product, rng.random(product.shape)), product.spacing), AnisotropyParams((1.0, 2.0), (1.0, 1.0)), (1.0, 1.0), 0.02),
        ("n=2 set", random_set(product, 0.5, int(rng.integers(0, 2**31))), AnisotropyParams((1.0, 1.5), (0.7, 1.0)), (2.0, 0.5), 0.02),
    ]
    for label, f, params, gammas, limit in cases:
        coarse = verify_theta_identity(f, params, gammas, quad)
        fine = verify_theta_identity(f, params, gammas, quad.doubled())
        out.append(_below("theta-identity", label, coarse["residual"], limit, residual_plain=coarse["residual_plain"], thetas=coarse["thetas"]))
        out.append(_record("theta-identity", f"{label} doubling", fine["residual"], 0.7 * coarse["residual"],
                           doubling_ok(coarse["residual"], fine["residual"])))
        negative = min(coarse["thetas"])
        out.append(_above("theta-identity", f"{label} nonnegative", negative, 0.0))
    return out


def covering(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(9)
    worst = 0
    mass = 0.0
    for _ in range(100):
        count = int(rng.integers(2, 13))
        ladder = ScaleLadder.geometric(float(rng.uniform(1.0, 10.0)), float(rng.uniform(2.0, 4.0)), count,
                                       float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.5, 3.0)))
        t = float(rng.uniform(0.05, 1.0))
        worst = max(worst, covering_multiplicity(ladder, t))
        mass = max(mass, abs(theta_interval_mass(ladder, t, int(rng.integers(0, count))) - 1.0))
    ladder = ScaleLadder((1.0, 2.0), 0.5, 1.0)
    try:
        ladder_radius_guard = False
        QuadratureSpec().radius(ladder, 0, 2.0 * math.e * ladder.theta, 1.0)
    except DomainError:
        ladder_radius_guard = True
    return [
        _record("covering", "max multiplicity", worst, 2, worst <= 2),
        _below("covering", "θ-interval mass", mass, EXACT_TOL),
        _record("covering", "radius domain guard", float(ladder_radius_guard), 1, ladder_radius_guard),
    ]


def structured_lower(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(10)
    plane = Grid(2, ctx.side, 64)
    product = Grid(4, ctx.side, 16)
    out = []
    for k in range(3):
        f = random_set(plane, float(rng.uniform(0.2, 0.8)), int(rng.integers(0, 2**31)))
        spec = BoxSpec(AnisotropyParams((1.0,), (1.0,)))
        res = structured_box_lower(f, spec, 8.0 * plane.spacing)
        out.append(_record("structured-lower", f"box n=1 case {k}", res["n1"], res["bound"], res["holds"], kappa=res["kappa"]))
        lam = 6.0 * plane.spacing
        tree = TreeSpec.path(AnisotropyParams((1.0, 2.0), (1.0, 1.5 / lam)))
        tres = structured_tree_lower(f, tree, lam)
        out.append(_record("structured-lower", f"tree case {k}", tres["n1"], tres["bound"], tres["holds"], kappa=tres["kappa"]))
    f = random_set(product, 0.5, int(rng.integers(0, 2**31)))
    res = structured_box_lower(f, BoxSpec(AnisotropyParams((1.0, 1.0), (1.0, 1.0))), 3.0 * product.spacing, workers=ctx.workers)
    out.append(_record("structured-lower", "box n=2", res["n1"], res["bound"], res["holds"], kappa=res["kappa"]))
    return out


def error_form_suite(ctx: SuiteContext) -> list[dict[str, Any]]:
    rng = ctx.rng(11)
    grid = Grid(2, ctx.side, 64)
    f = random_set(grid, 0.4, int(rng.integers(0, 2**31)))
    lam = 8.0 * grid.spacing
    out = []
    specs = (
        ("box", BoxSpec(AnisotropyParams((1.0,), (1.0,)))),
        ("tree", TreeSpec.path(AnisotropyParams((1.0, 1.0), (1.0, 1.0)))),
    )
    for label, spec in specs:
        res = error_form(f, spec, lam, 0.25, workers=ctx.workers)
        out.append(_below("error-form", label, res["residual"], 0.01, estimate=res["estimate"], direct=res["direct"]))
    return out


def uniform_scaling(ctx: SuiteContext) -> list[dict[str, Any]]:
    grid = Grid(2, ctx.side, UNIFORM_CELLS)
    # the ball autocorrelation is harmonic at |y| = √2·radius; ρ must stay clear of it
    rho = ctx.side / 8.0
    f = smoothed_ball(grid, 2.0 * rho, 4.0 * grid.spacing)
    eps = [2.0**-k for k in range(1, 6)]
    out = []
    for a in (1.0, 2.0):
        spec = BoxSpec(AnisotropyParams((a,), (1.0,)))
        lam = rho ** (1.0 / a)
        res = uniform_scaling_slope(f, spec, lam, eps, workers=ctx.workers)
        out.append(_above("uniform-scaling", f"slope a={a:g}", res["slope"], a / 2.0 - 0.15, uniform=res["uniform"]))
    return out


SUITES: dict[str, Callable[[SuiteContext], list[dict[str, Any]]]] = {
    "gaussian-identities": gaussian_identities,
    "heat-flow": heat_flow,
    "fourier-decay": fourier_decay,
    "martingale": martingale,
    "counting-oracles": counting_oracles,
    "simplex-representation": simplex_representation,
    "theta-identity": theta_identity,
    "square-identity": square_identity_suite,
    "covering": covering,
    "structured-lower": structured_lower,
    "error-form": error_form_suite,
    "uniform-scaling": uniform_scaling,
}
DEFAULT_SUITES = tuple(SUITES)


def run_suite(name: str, ctx: SuiteContext) -> list[dict[str, Any]]:
    if name not in SUITES:
        raise DomainError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    logger.info("suite %s: start", name)
    records = SUITES[name](ctx)
    failed = sum(not r["passed"] for r in records)
    if failed:
        logger.warning("suite %s: %d of %d check(s) failed", name, failed, len(records))
    else:
        logger.info("suite %s: %d check(s) passed", name, len(records))
    return records
