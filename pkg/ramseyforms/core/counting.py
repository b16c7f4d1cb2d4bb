from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np
from scipy import fft as sfft

from ramseyforms.core.errors import (
    ConfigurationError,
    DegenerateConfigurationError,
    DimensionError,
    DomainError,
    WraparoundError,
)
from ramseyforms.core.grid import Grid, GridField, convolve
from ramseyforms.core.kernels import AnisotropyParams, heat_smooth
from ramseyforms.core.martingale import dyadic_tree_minorant, level_for_radius
from ramseyforms.core.parallel import ordered_map
from ramseyforms.core.spherical import (
    RotationSampler,
    SubsphereMeasure,
    discretize_sphere,
    simplex_gram,
    smoothed_sphere_field,
    sphere_field,
    sphere_sample,
    subsphere_sample,
)

logger = logging.getLogger(__name__)

DEFAULT_COVERAGE = 0.999
MC_CHUNK = 64
MIN_SAMPLES = 100
# Largest configuration scale, as a fraction of the side, that cannot meet its own torus image.
WRAP_FRACTION = 0.25
SINGULAR_SURROGATES = ("annulus", "spectral")


# ---------------------------------------------------------------- specs


@dataclass(frozen=True)
class BoxSpec:
    """
    Box {0, λ^{a_1}b_1} x ... x {0, λ^{a_n}b_n} with one factor per coordinate plane.

    plane_dims[k] is the dimension of factor k (2 for the theorem, 1 for the counterexample
    geometry); the grid dimension is their sum.
    """

    params: AnisotropyParams
    plane_dims: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        dims = tuple(int(p) for p in self.plane_dims) or (2,) * self.params.n
        object.__setattr__(self, "plane_dims", dims)
        if self.params.n not in (1, 2):
            raise ConfigurationError(f"box forms are implemented for n in {{1, 2}}, got n={self.params.n}")
        if len(dims) != self.params.n:
            raise ConfigurationError(f"plane_dims has {len(dims)} entries for n={self.params.n}")
        if any(p not in (1, 2) for p in dims):
            raise ConfigurationError(f"each plane has dimension 1 or 2, got {dims}")
        if sum(dims) > 4:
            raise ConfigurationError(f"grid dimension {sum(dims)} exceeds 4")

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def grid_dim(self) -> int:
        return sum(self.plane_dims)

    def plane_axes(self, k: int) -> tuple[int, ...]:
        start = sum(self.plane_dims[:k])
        return tuple(range(start, start + self.plane_dims[k]))

    def swapped(self) -> BoxSpec:
        order = tuple(reversed(range(self.n)))
        return BoxSpec(self.params.permuted(order), tuple(self.plane_dims[i] for i in order))


@dataclass(frozen=True)
class TreeSpec:
    """
    Distance tree on vertices 0..|V|-1; edge k joins edges[k] = (u(k), v(k)) and carries the
    dilation law (a_k, b_k).
    """

    vertices: int
    edges: tuple[tuple[int, int], ...]
    params: AnisotropyParams
    root: int = 0

    def __post_init__(self) -> None:
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) != self.vertices - 1:
            raise DegenerateConfigurationError(f"a tree on {self.vertices} vertices needs {self.vertices - 1} edges, got {len(edges)}")
        if self.params.n != len(edges):
            raise ConfigurationError(f"got {self.params.n} dilation laws for {len(edges)} edges")
        for u, v in edges:
            if not (0 <= u < self.vertices and 0 <= v < self.vertices) or u == v:
                raise DegenerateConfigurationError(f"invalid edge ({u}, {v})")
        if not 0 <= self.root < self.vertices:
            raise DegenerateConfigurationError(f"root {self.root} is not a vertex")
        seen = {self.root}
        frontier = [self.root]
        while frontier:
            x = frontier.pop()
            for u, v in edges:
                for a, b in ((u, v), (v, u)):
                    if a == x and b not in seen:
                        seen.add(b)
                        frontier.append(b)
        if len(seen) != self.vertices:
            raise DegenerateConfigurationError("the edges do not connect every vertex")

    @classmethod
    def path(cls, params: AnisotropyParams, root: int = 0) -> TreeSpec:
        return cls(params.n + 1, tuple((k, k + 1) for k in range(params.n)), params, root)

    @classmethod
    def star(cls, params: AnisotropyParams) -> TreeSpec:
        return cls(params.n + 1, tuple((0, k + 1) for k in range(params.n)), params, 0)

    def rerooted(self, root: int) -> TreeSpec:
        return TreeSpec(self.vertices, self.edges, self.params, root)

    def children(self, root: int | None = None) -> dict[int, list[tuple[int, int]]]:
        """vertex -> [(child, edge index)] when hanging the tree from root."""
        top = self.root if root is None else root
        out: dict[int, list[tuple[int, int]]] = {v: [] for v in range(self.vertices)}
        seen = {top}
        frontier = [top]
        while frontier:
            x = frontier.pop(0)
            for k, (u, v) in enumerate(self.edges):
                other = v if u == x else u if v == x else None
                if other is not None and other not in seen:
                    seen.add(other)
                    out[x].append((other, k))
                    frontier.append(other)
        return out


@dataclass(frozen=True)
class SimplexSpec:
    """
    Simplex {0, λ^{a_k}b_k·U·u_k} in R^{n+1}: unit directions u_k in R^n padded with a zero
    coordinate, plus their Gram data β_{k,i} and distances d_k.
    """

    directions: tuple[tuple[float, ...], ...]
    params: AnisotropyParams
    betas: tuple[tuple[float, ...], ...] = field(init=False)
    distances: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        u = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        n = u.shape[0]
        if n not in (1, 2):
            raise ConfigurationError(f"simplex forms are implemented for n in {{1, 2}}, got n={n}")
        if u.shape[1] != n:
            raise ConfigurationError(f"directions must live in R^{n}, got vectors of length {u.shape[1]}")
        if self.params.n != n:
            raise ConfigurationError(f"got {self.params.n} dilation laws for {n} directions")
        norms = np.linalg.norm(u, axis=1)
        if np.any(norms < 1e-12):
            raise DegenerateConfigurationError("directions must be nonzero")
        u = u / norms[:, None]
        betas, dists = simplex_gram(u)
        object.__setattr__(self, "directions", tuple(tuple(float(x) for x in row) for row in u))
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "distances", dists)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    def embedded(self) -> np.ndarray:
        u = np.asarray(self.directions, dtype=np.float64)
        return np.hstack([u, np.zeros((self.n, 1))])


class MonteCarloResult(NamedTuple):
    estimate: float
    stderr: float
    samples: int


# ---------------------------------------------------------------- kernels


def check_wraparound(grid: Grid, scales: Sequence[float]) -> None:
    limit = WRAP_FRACTION * grid.side
    for rho in scales:
        if rho > limit * (1.0 + 1e-12):
            raise WraparoundError(f"configuration scale {rho:.6g} exceeds R/4 = {limit:.6g}; increase side")


def edge_kernel(
    grid: Grid, rho: float, smoothing: float, shell_width: float = 1.0, singular: str = "annulus"
) -> GridField:
    """
    Kernel of one factor or edge: (σ * g_s)_ρ built spectrally when smoothing > 0, a surrogate of
    σ_ρ when smoothing == 0 (the annulus, or σ̂ on the grid frequencies for singular="spectral").

    :param grid: grid of the factor's coordinate plane
    :type grid: Grid
    :param rho: sphere radius λ^{a}b
    :type rho: float
    :param smoothing: absolute smoothing scale ε^{a}·ρ
    :type smoothing: float
    :param shell_width: annulus width in cells for the singular surrogate
    :type shell_width: float
    :param singular: "annulus" (pointwise nonnegative) or "spectral" (exact limit of the smoothed kernels)
    :type singular: str
    """
    check_wraparound(grid, [rho])
    if smoothing < 0:
        raise DomainError(f"smoothing must be nonnegative, got {smoothing!r}")
    if singular not in SINGULAR_SURROGATES:
        raise ConfigurationError(f"unknown singular surrogate {singular!r}; expected one of {SINGULAR_SURROGATES}")
    if smoothing == 0:
        if singular == "spectral":
            return sphere_field(grid, rho)
        return discretize_sphere(grid, rho, shell_width)
    return smoothed_sphere_field(grid, rho, smoothing)


def _check_eps(eps: float) -> None:
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"ε must lie in [0, 1], got {eps!r}")


def box_kernels(
    grid: Grid, spec: BoxSpec, lam: float, eps: float, shell_width: float = 1.0, singular: str = "annulus"
) -> list[GridField]:
    _check_eps(eps)
    out = []
    for p, a, rho in zip(spec.plane_dims, spec.params.a, spec.params.scales(lam)):
        out.append(edge_kernel(grid.with_dim(p), rho, eps**a * rho, shell_width, singular))
    return out


def tree_kernels(
    grid: Grid, spec: TreeSpec, lam: float, eps: float, shell_width: float = 1.0, singular: str = "annulus"
) -> list[GridField]:
    _check_eps(eps)
    return [edge_kernel(grid, rho, eps**a * rho, shell_width, singular) for a, rho in zip(spec.params.a, spec.params.scales(lam))]


def _collect_warnings(kernels: Sequence[GridField]) -> list[str]:
    out = []
    for k, kern in enumerate(kernels):
        if kern.meta.get("under_resolved"):
            out.append(f"kernel {k}: smoothing {kern.meta.get('smoothing', 0.0):.4g} is under-resolved")
    return out


def _reflected(values: np.ndarray) -> np.ndarray:
    """K(-y) on the displacement lattice."""
    axes = tuple(range(values.ndim))
    return np.roll(np.flip(values, axis=axes), 1, axis=axes)


def kernel_matrix(kernel: GridField) -> np.ndarray:
    """Dense M x M matrix K[(i_a - i_e) mod N] over the flattened lattice."""
    grid = kernel.grid
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    diff = (idx[:, None, :] - idx[None, :, :]) % grid.cells
    return kernel.values[tuple(diff[..., i] for i in range(grid.dim))]


# ---------------------------------------------------------------- boxes


class CubicalTensor:
    """
    The 2^n-fold product of f over the vertices of a box, for n = 2, materialised one slice at a
    time: fixing x_1^1 = x_1^0 + δ, pair_product(δ) is F(x_1, x_2)·F(x_1 + δ, x_2) as a field of
    (x_1, x_2).
    """

    def __init__(self, f: GridField, plane_dims: tuple[int, int]) -> None:
        if len(plane_dims) != 2 or f.dim != sum(plane_dims):
            raise DimensionError(f"field of dimension {f.dim} does not split into planes {plane_dims}")
        self.f = f
        self.plane_dims = plane_dims
        self.axes1 = tuple(range(plane_dims[0]))
        self.axes2 = tuple(range(plane_dims[0], f.dim))
        self.shape1 = (f.cells,) * plane_dims[0]
        self.shape2 = (f.cells,) * plane_dims[1]

    def pair_product(self, delta: Sequence[int]) -> np.ndarray:
        v = self.f.values
        return v * np.roll(v, tuple(-int(x) for x in delta), axis=self.axes1)

    def pair_energy(self) -> np.ndarray:
        """W[δ, η] = Σ_{x_1} |FFT_{x_2} pair_product(δ)(x_1, ·)(η)|², shape plane1 + plane2."""
        w = np.empty(self.shape1 + self.shape2)
        for delta in np.ndindex(*self.shape1):
            spec = sfft.fftn(self.pair_product(delta), axes=self.axes2)
            w[delta] = np.sum(np.abs(spec) ** 2, axis=self.axes1)
        return w

    def swapped(self) -> CubicalTensor:
        p1, p2 = self.plane_dims
        order = tuple(range(p1, p1 + p2)) + tuple(range(p1))
        values = np.transpose(self.f.values, order)
        return CubicalTensor(GridField(self.f.grid, values), (p2, p1))


def _check_box_inputs(f: GridField, kernels: Sequence[GridField], plane_dims: Sequence[int]) -> None:
    if len(kernels) != len(plane_dims):
        raise DimensionError(f"{len(kernels)} kernels for {len(plane_dims)} planes")
    if f.dim != sum(plane_dims):
        raise DimensionError(f"field of dimension {f.dim} does not match planes {tuple(plane_dims)}")
    for kern, p in zip(kernels, plane_dims):
        if kern.grid != f.grid.with_dim(p):
            raise DimensionError(f"kernel grid {kern.grid} does not match plane grid {f.grid.with_dim(p)}")


def coverage_indices(weights: np.ndarray, coverage: float) -> list[tuple[int, ...]]:
    """
    Lattice indices of the largest |weights| that together hold the requested share of the total
    mass, in descending order; exact zeros are always dropped.
    """
    flat = np.abs(weights).ravel()
    order = np.argsort(-flat, kind="stable")
    order = order[flat[order] > 0]
    if coverage < 1.0 and order.size:
        cum = np.cumsum(flat[order])
        keep = int(np.searchsorted(cum, coverage * cum[-1])) + 1
        order = order[:keep]
    return [tuple(int(i) for i in np.unravel_index(j, weights.shape)) for j in order]


def box_form(
    f: GridField,
    kernels: Sequence[GridField],
    plane_dims: Sequence[int] | None = None,
    coverage: float = DEFAULT_COVERAGE,
    workers: int = 1,
) -> float:
    """
    Box counting form with explicit factor kernels.

    n=1 pairs f with f*K. n=2 runs the pair-slice algorithm: for every plane-1 displacement δ
    kept by the coverage rule, the slice P = F·F(· + δ) is paired spectrally with K_2 over the
    second plane and weighted by K_1(-δ).

    :param f: field on the product grid
    :type f: GridField
    :param kernels: one displacement kernel per factor
    :type kernels: Sequence[GridField]
    :param plane_dims: factor dimensions; defaults to the kernels' dimensions
    :type plane_dims: Sequence[int] | None
    :param coverage: share of the K_1 mass visited by the outer loop (1.0 visits every δ)
    :type coverage: float
    :param workers: threads for the outer loop
    :type workers: int
    :return: the form value
    :rtype: float
    """
    dims = tuple(plane_dims) if plane_dims is not None else tuple(k.dim for k in kernels)
    _check_box_inputs(f, kernels, dims)
    h = f.grid.spacing
    if len(kernels) == 1:
        return float(np.sum(f.values * convolve(f, kernels[0]).values)) * h ** dims[0]
    if len(kernels) != 2:
        raise DomainError(f"box forms are implemented for n in {{1, 2}}, got n={len(kernels)}")

    tensor = CubicalTensor(f, (dims[0], dims[1]))
    p1, p2 = dims
    weights = _reflected(kernels[0].values)
    slices = coverage_indices(weights, coverage)
    k2 = sfft.rfftn(kernels[1].values)
    shape2 = tensor.shape2

    def _slice(delta: tuple[int, ...]) -> float:
        pair = tensor.pair_product(delta)
        smoothed = sfft.irfftn(sfft.rfftn(pair, axes=tensor.axes2) * k2, s=shape2, axes=tensor.axes2)
        inner = float(np.sum(pair * smoothed)) * h ** (p1 + 2 * p2)
        return float(weights[delta]) * h**p1 * inner

    parts = ordered_map(_slice, slices, workers)
    logger.debug("pair-slice form visited %d of %d slices", len(slices), weights.size)
    return float(math.fsum(parts))


def box_form_bruteforce(f: GridField, kernels: Sequence[GridField], plane_dims: Sequence[int] | None = None) -> float:
    """Nested-sum oracle with dense kernel matrices; meant for grids of at most 16² per plane."""
    dims = tuple(plane_dims) if plane_dims is not None else tuple(k.dim for k in kernels)
    _check_box_inputs(f, kernels, dims)
    h = f.grid.spacing
    mats = [kernel_matrix(k) for k in kernels]
    if len(dims) == 1:
        v = f.values.ravel()
        return float(v @ mats[0] @ v) * h ** (2 * dims[0])
    m1 = f.cells ** dims[0]
    F = f.values.reshape(m1, -1)
    total = np.einsum("ab,eb,ac,ec,ae,bc->", F, F, F, F, mats[0], mats[1], optimize=True)
    return float(total) * h ** (2 * sum(dims))


def count_boxes(
    f: GridField,
    spec: BoxSpec,
    lam: float,
    eps: float,
    shell_width: float = 1.0,
    coverage: float = DEFAULT_COVERAGE,
    workers: int = 1,
    *,
    singular: str = "annulus",
) -> float:
    """Box form at scale λ: smoothed for ε > 0, the chosen singular surrogate for ε = 0."""
    if f.dim != spec.grid_dim:
        raise DimensionError(f"box spec needs a {spec.grid_dim}-dimensional field, got {f.dim}")
    kernels = box_kernels(f.grid, spec, lam, eps, shell_width, singular)
    for w in _collect_warnings(kernels):
        logger.warning("count_boxes λ=%.4g ε=%.4g: %s", lam, eps, w)
    return box_form(f, kernels, spec.plane_dims, coverage, workers)


# ---------------------------------------------------------------- trees


def _fold_tree(f: GridField, spec: TreeSpec, kernels: Sequence[GridField], root: int) -> np.ndarray:
    children = spec.children(root)

    def _fold(v: int) -> np.ndarray:
        out = f.values.copy()
        for child, k in children[v]:
            kern = kernels[k]
            # edge kernels act on x_u - x_v; a child on the u side needs K(-y)
            if spec.edges[k][0] == child:
                kern = GridField(kern.grid, _reflected(kern.values))
            out = out * convolve(GridField(f.grid, _fold(child)), kern).values
        return out

    return _fold(root)


def tree_form(f: GridField, spec: TreeSpec, kernels: Sequence[GridField], root: int | None = None) -> float:
    """
    Tree counting form by folding the leaves into the root: A_v = f·Π (A_child * K_edge), and the
    value is the integral of A at the root.
    """
    if len(kernels) != len(spec.edges):
        raise DimensionError(f"{len(kernels)} kernels for {len(spec.edges)} edges")
    for kern in kernels:
        if kern.grid != f.grid:
            raise DimensionError(f"kernel grid {kern.grid} does not match field grid {f.grid}")
    top = spec.root if root is None else root
    return float(np.sum(_fold_tree(f, spec, kernels, top))) * f.grid.cell_volume


def tree_form_bruteforce(f: GridField, spec: TreeSpec, kernels: Sequence[GridField]) -> float:
    """Nested-sum oracle: one einsum index per vertex, one dense kernel matrix per edge."""
    v = f.values.ravel()
    operands: list[Any] = []
    for vertex in range(spec.vertices):
        operands.extend([v, [vertex]])
    for (u, w), kern in zip(spec.edges, kernels):
        operands.extend([kernel_matrix(kern), [u, w]])
    total = np.einsum(*operands, [], optimize=True)
    return float(total) * f.grid.cell_volume**spec.vertices


def tree_operator(f: GridField, spec: TreeSpec, lam: float, eps: float, shell_width: float = 1.0) -> GridField:
    """The one-variable field A_T f at the root vertex."""
    kernels = tree_kernels(f.grid, spec, lam, eps, shell_width)
    return GridField(f.grid, _fold_tree(f, spec, kernels, spec.root))


def count_tree(
    f: GridField, spec: TreeSpec, lam: float, eps: float, shell_width: float = 1.0, *, singular: str = "annulus"
) -> float:
    kernels = tree_kernels(f.grid, spec, lam, eps, shell_width, singular)
    for w in _collect_warnings(kernels):
        logger.warning("count_tree λ=%.4g ε=%.4g: %s", lam, eps, w)
    return tree_form(f, spec, kernels)


# ---------------------------------------------------------------- simplices


def interpolated_shift(values: np.ndarray, offset_cells: np.ndarray) -> np.ndarray:
    """g(x) = f(x + offset) on the periodic lattice by multilinear interpolation."""
    base = np.floor(offset_cells).astype(int)
    frac = offset_cells - base
    axes = tuple(range(values.ndim))
    out = np.zeros_like(values)
    for corner in itertools.product((0, 1), repeat=values.ndim):
        weight = 1.0
        for a, c in enumerate(corner):
            weight *= frac[a] if c else 1.0 - frac[a]
        if weight == 0.0:
            continue
        out += weight * np.roll(values, tuple(-(int(b) + c) for b, c in zip(base, corner)), axis=axes)
    return out


def _simplex_factors(f: GridField, spec: SimplexSpec, lam: float, eps: float) -> tuple[list[np.ndarray], list[float]]:
    if f.dim != spec.ambient_dim:
        raise DimensionError(f"simplex spec with n={spec.n} needs a {spec.ambient_dim}-dimensional field, got {f.dim}")
    _check_eps(eps)
    scales = list(spec.params.scales(lam))
    check_wraparound(f.grid, scales)
    factors = []
    for a, rho in zip(spec.params.a, scales):
        smoothed = heat_smooth(f, eps**a * rho) if eps > 0 else f
        if smoothed.meta.get("under_resolved"):
            logger.warning("simplex pre-smoothing at %.4g is under-resolved", eps**a * rho)
        factors.append(smoothed.values)
    return factors, scales


def _check_samples(samples: int) -> None:
    if samples < MIN_SAMPLES:
        raise ConfigurationError(f"Monte Carlo needs at least {MIN_SAMPLES} samples, got {samples}")


def _chunks(samples: int) -> list[tuple[int, int]]:
    return [(c, min(MC_CHUNK, samples - c * MC_CHUNK)) for c in range(math.ceil(samples / MC_CHUNK))]


def _summarise(values: np.ndarray) -> MonteCarloResult:
    return MonteCarloResult(float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size)), int(values.size))


def _shifted_integral(f: GridField, factors: Sequence[np.ndarray], shifts: Sequence[np.ndarray]) -> float:
    prod = f.values.copy()
    for fac, shift in zip(factors, shifts):
        prod = prod * interpolated_shift(fac, shift / f.grid.spacing)
    return float(np.sum(prod)) * f.grid.cell_volume


def count_simplex_mc(
    f: GridField,
    spec: SimplexSpec,
    lam: float,
    eps: float,
    samples: int,
    seed: int,
    workers: int = 1,
) -> MonteCarloResult:
    """
    Monte Carlo over Haar rotations U of ∫ f(x)·Π_k f_k(x + λ^{a_k}b_k·U·u_k) dx, where f_k is f
    smoothed at (ελ)^{a_k}b_k (or f itself for ε = 0).

    Rotations come in chunks of 64, chunk c drawing from SeedSequence(seed, spawn_key=(c,)), so the
    estimate does not depend on the worker count.
    """
    _check_samples(samples)
    factors, scales = _simplex_factors(f, spec, lam, eps)
    u = spec.embedded()

    def _chunk(item: tuple[int, int]) -> np.ndarray:
        chunk, count = item
        rotations = RotationSampler(f.dim, seed, stream=chunk).rotations(count)
        return np.array([_shifted_integral(f, factors, [rho * (U @ u[k]) for k, rho in enumerate(scales)]) for U in rotations])

    values = np.concatenate(ordered_map(_chunk, _chunks(samples), workers))
    return _summarise(values)


def nested_simplex_form(
    f: GridField,
    spec: SimplexSpec,
    lam: float,
    eps: float,
    samples: int,
    seed: int,
    workers: int = 1,
) -> MonteCarloResult:
    """
    The nested representation for n = 2 in R³: y_1 uniform on the sphere, then y_2 from the
    subsphere centered at β_{2,1}·y_1 with radius d_2 orthogonal to y_1.
    """
    if spec.n != 2 or f.dim != 3:
        raise DomainError("the nested representation is implemented for n = 2 in R³")
    _check_samples(samples)
    factors, scales = _simplex_factors(f, spec, lam, eps)
    beta21 = spec.betas[1][0]
    d2 = spec.distances[1]

    def _chunk(item: tuple[int, int]) -> np.ndarray:
        chunk, count = item
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk, 1)))
        ys = sphere_sample(3, 1.0, rng, count)
        out = []
        for y1 in ys:
            y2 = subsphere_sample(SubsphereMeasure(3, (tuple(y1),), (beta21,), d2), rng)
            out.append(_shifted_integral(f, factors, [scales[0] * y1, scales[1] * y2]))
        return np.array(out)

    values = np.concatenate(ordered_map(_chunk, _chunks(samples), workers))
    return _summarise(values)


# ---------------------------------------------------------------- dispatch


def count_form(
    f: GridField,
    spec: BoxSpec | TreeSpec | SimplexSpec,
    lam: float,
    eps: float,
    *,
    shell_width: float = 1.0,
    coverage: float = DEFAULT_COVERAGE,
    samples: int = 1000,
    seed: int = 0,
    workers: int = 1,
    singular: str = "annulus",
) -> tuple[float, float | None]:
    """
    (value, stderr) for any spec; stderr is None for the deterministic forms. singular picks the
    ε = 0 surrogate of the box and tree kernels; simplices sample the sphere directly.
    """
    if isinstance(spec, BoxSpec):
        return count_boxes(f, spec, lam, eps, shell_width, coverage, workers, singular=singular), None
    if isinstance(spec, TreeSpec):
        return count_tree(f, spec, lam, eps, shell_width, singular=singular), None
    if isinstance(spec, SimplexSpec):
        res = count_simplex_mc(f, spec, lam, eps, samples, seed, workers)
        return res.estimate, res.stderr
    raise ConfigurationError(f"unsupported configuration spec: {type(spec).__name__}")


def reference_count(grid: Grid) -> float:
    """Value of every form on f ≡ 1: R^dim."""
    return grid.side**grid.dim


# ---------------------------------------------------------------- structured lower bounds


def _kernel_floor(kernel: GridField, cells: int) -> float:
    """min of the kernel over displacements with every component at most cells - 1 lattice steps."""
    idx = np.arange(kernel.cells)
    idx = np.where(idx >= kernel.cells // 2, idx - kernel.cells, idx)
    near = np.abs(idx) <= cells - 1
    mask = near
    for _ in range(kernel.dim - 1):
        mask = np.multiply.outer(mask, near)
    return float(np.min(kernel.values[np.asarray(mask, dtype=bool).reshape(kernel.grid.shape)]))


def structured_box_lower(f: GridField, spec: BoxSpec, lam: float, workers: int = 1) -> dict[str, Any]:
    """
    N¹ against the block-partition lower bound κ·δ^{2^n}·R^{Σp}.

    For factor k, s_k is the largest power-of-two cell count with s_k·h <= λ^{a_k}b_k and
    floor_k the minimum of the ε = 1 kernel over one block of s_k cells. Pairs in a common block
    see at least floor_k, and Cauchy-Schwarz over the blocks gives κ = Π floor_k·(s_k h)^{p_k}.
    """
    if np.any(f.values < 0):
        raise DomainError("the structured bound needs a nonnegative f")
    kernels = box_kernels(f.grid, spec, lam, 1.0)
    h = f.grid.spacing
    warnings: list[str] = []
    kappa = 1.0
    blocks: list[int] = []
    floors: list[float] = []
    partitions = 1
    for kern, rho, p in zip(kernels, spec.params.scales(lam), spec.plane_dims):
        if rho < h:
            raise DomainError(f"scale {rho:.4g} is below one grid cell")
        s = 1 << int(math.floor(math.log2(rho / h) + 1e-12))
        s = min(s, f.cells)
        floor = _kernel_floor(kern, s)
        if floor <= 0:
            warnings.append(f"kernel floor {floor:.3g} is not positive; bound degenerates to 0")
            logger.warning("structured box bound: kernel floor %.3g is not positive", floor)
            floor = 0.0
        blocks.append(s)
        floors.append(floor)
        kappa *= floor * (s * h) ** p
        partitions *= (f.cells // s) ** p
    n1 = box_form(f, kernels, spec.plane_dims, coverage=1.0, workers=workers)
    density = float(np.mean(f.values))
    reference = density ** (2**spec.n) * f.side**spec.grid_dim
    bound = kappa * reference
    return {
        "n1": n1,
        "reference": reference,
        "kappa": kappa,
        "bound": bound,
        "holds": n1 >= bound - 1e-9 * f.side**spec.grid_dim,
        "partition_count": partitions,
        "block_cells": blocks,
        "floors": floors,
        "density": density,
        "warnings": warnings,
    }


def structured_tree_lower(f: GridField, spec: TreeSpec, lam: float) -> dict[str, Any]:
    """
    N¹ >= ∫ D_T f >= κ·δ^{|V|}·R^d with D_T the dyadic minorant: each child fold is replaced by
    κ_k·E_{l_k}, l_k the smallest level with 2^{-l_k}R < λ^{a_k}b_k and κ_k = floor_k·(block side)^d.
    """
    if np.any(f.values < 0):
        raise DomainError("the structured bound needs a nonnegative f")
    grid = f.grid
    kernels = tree_kernels(grid, spec, lam, 1.0)
    warnings: list[str] = []
    weights: list[float] = []
    levels: list[int] = []
    for kern, rho in zip(kernels, spec.params.scales(lam)):
        level = level_for_radius(grid, rho, by_diameter=False)
        cells = grid.cells >> level
        floor = _kernel_floor(kern, cells)
        if floor <= 0:
            warnings.append(f"kernel floor {floor:.3g} is not positive; bound degenerates to 0")
            floor = 0.0
        levels.append(level)
        weights.append(floor * (cells * grid.spacing) ** grid.dim)

    children = {
        v: [(child, levels[k], weights[k]) for child, k in kids] for v, kids in spec.children().items()
    }
    minorant = dyadic_tree_minorant(f, children, spec.root)
    operator = _fold_tree(f, spec, kernels, spec.root)
    n1 = float(np.sum(operator)) * grid.cell_volume
    integral = float(np.sum(minorant.values)) * grid.cell_volume
    kappa = float(np.prod(weights))
    density = float(np.mean(f.values))
    reference = density**spec.vertices * grid.side**grid.dim
    tol = 1e-9 * grid.side**grid.dim
    return {
        "n1": n1,
        "minorant_integral": integral,
        "kappa": kappa,
        "reference": reference,
        "bound": kappa * reference,
        "pointwise_margin": float(np.min(operator - minorant.values)),
        "holds": n1 >= integral - tol and integral >= kappa * reference - tol,
        "levels": levels,
        "edge_weights": weights,
        "density": density,
        "warnings": warnings,
    }
