from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import special

from ramseyforms.core.errors import DegenerateConfigurationError, DomainError
from ramseyforms.core.grid import Grid, GridField
from ramseyforms.core.kernels import is_resolved, spectral_field

logger = logging.getLogger(__name__)

INDEPENDENCE_TOL = 1e-12
MIN_SHELL_RADIUS_CELLS = 4.0


def _freq_norm(xi: Any) -> tuple[np.ndarray, bool]:
    arr = np.asarray(xi, dtype=np.float64)
    if arr.ndim == 0:
        return np.abs(arr), True
    if arr.ndim == 1:
        return np.asarray(np.linalg.norm(arr)), True
    return np.linalg.norm(arr, axis=-1), False


def sphere_profile(dim: int, rho: np.ndarray) -> np.ndarray:
    """σ̂ of the unit sphere in R^dim as a function of ρ = |ξ|."""
    x = 2.0 * math.pi * np.asarray(rho, dtype=np.float64)
    if dim == 1:
        return np.cos(x)
    if dim == 2:
        return special.j0(x)
    if dim == 3:
        # np.sinc(u) = sin(πu)/(πu)
        return np.sinc(2.0 * np.asarray(rho, dtype=np.float64))
    raise DomainError(f"sphere transforms are implemented for d in {{1, 2, 3}}, got {dim}")


def sphere_fourier(dim: int, r: float, xi: Any) -> float | np.ndarray:
    """
    Fourier transform of the normalised sphere measure of radius r centered at the origin.

    d=1 is the two-point sphere {-r, r} (cos 2πr|ξ|), d=2 gives J0(2πr|ξ|), d=3 gives
    sin(2πr|ξ|)/(2πr|ξ|).

    :param xi: |ξ| as a scalar, a frequency vector, or an array of vectors along the last axis
    :type xi: Any
    """
    if not r > 0:
        raise DomainError(f"sphere radius must be positive, got {r!r}")
    rho, scalar = _freq_norm(xi)
    out = sphere_profile(dim, r * rho)
    return float(out) if scalar else out


def sphere_fourier_quadrature(r: float, xi: Sequence[float], nodes: int = 10_000) -> float:
    """Angular quadrature of ∫ e^{-2πi x·ξ} dσ_r(x) on the circle (periodic trapezoid)."""
    xi1, xi2 = float(xi[0]), float(xi[1])
    theta = 2.0 * math.pi * np.arange(nodes) / nodes
    phase = 2.0 * math.pi * r * (np.cos(theta) * xi1 + np.sin(theta) * xi2)
    return float(np.mean(np.exp(-1j * phase)).real)


def decay_margin(dim: int, radii: Any = None, r: float = 1.0) -> float:
    """
    max |σ̂(ξ)|·max(1, |ξ|)^{(d-1)/2} over the sampled |ξ|.

    :param radii: sample frequencies; defaults to 200001 uniform points on [0, 1e3]
    :type radii: Any
    """
    if dim not in (2, 3):
        raise DomainError(f"decay margins are asserted for d in {{2, 3}}, got {dim}")
    rho = np.linspace(0.0, 1e3, 200_001) if radii is None else np.asarray(radii, dtype=np.float64)
    values = np.abs(sphere_profile(dim, r * rho)) * np.maximum(1.0, rho) ** ((dim - 1) / 2.0)
    return float(np.max(values))


@dataclass(frozen=True)
class SphereMeasure:
    """Normalised surface measure of a sphere; mass 1 by construction."""

    dim: int
    radius: float
    center: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DomainError(f"sphere radius must be positive, got {self.radius!r}")
        if self.center is not None and len(self.center) != self.dim:
            raise DomainError(f"center has {len(self.center)} coordinates, expected {self.dim}")

    def fourier(self, xi: Any) -> complex | np.ndarray:
        base = sphere_fourier(self.dim, self.radius, xi)
        if self.center is None:
            return base
        arr = np.asarray(xi, dtype=np.float64)
        phase = np.exp(-2j * math.pi * (arr @ np.asarray(self.center, dtype=np.float64)))
        return base * phase

    def sample(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        pts = sphere_sample(self.dim, self.radius, rng, count)
        if self.center is not None:
            pts = pts + np.asarray(self.center, dtype=np.float64)
        return pts


def _orthonormal_basis(vectors: np.ndarray) -> np.ndarray:
    """Gram-Schmidt rows; raises when a vector is dependent on the previous ones."""
    basis: list[np.ndarray] = []
    for k, v in enumerate(vectors):
        w = v.astype(np.float64).copy()
        for e in basis:
            w = w - (w @ e) * e
        norm = float(np.linalg.norm(w))
        if norm < INDEPENDENCE_TOL:
            raise DegenerateConfigurationError(f"vector {k} is linearly dependent on the previous ones")
        basis.append(w / norm)
    return np.array(basis)


@dataclass(frozen=True)
class SubsphereMeasure:
    """
    Normalised measure on the sphere of radius d_k centered at Σ β_i e_i, inside the affine
    plane orthogonal to span(y_1..y_{k-1}); e_i is the Gram-Schmidt basis of the constraints.
    """

    dim: int
    constraints: tuple[tuple[float, ...], ...]
    beta: tuple[float, ...]
    radius: float
    basis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DomainError(f"subsphere radius must be positive, got {self.radius!r}")
        if len(self.beta) != len(self.constraints):
            raise DomainError(f"got {len(self.beta)} center coefficients for {len(self.constraints)} constraints")
        ys = np.atleast_2d(np.asarray(self.constraints, dtype=np.float64))
        if ys.size and ys.shape[1] != self.dim:
            raise DomainError(f"constraint vectors must live in R^{self.dim}")
        if len(self.constraints) >= self.dim:
            raise DegenerateConfigurationError("the constraints leave no room for a sphere")
        object.__setattr__(self, "basis", _orthonormal_basis(ys) if ys.size else np.zeros((0, self.dim)))

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=np.float64) @ self.basis if len(self.beta) else np.zeros(self.dim)


class RotationSampler:
    """
    Haar-distributed rotations in SO(dim), deterministic per (seed, stream).

    One sampler per work unit; the stream index keys an independent numpy SeedSequence child.
    """

    def __init__(self, dim: int, seed: int, stream: int = 0) -> None:
        if dim not in (2, 3):
            raise DomainError(f"rotations are sampled for dim in {{2, 3}}, got {dim}")
        self.dim = dim
        self.seed = int(seed)
        self.stream = int(stream)
        self.rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.stream,)))

    def rotations(self, count: int) -> np.ndarray:
        g = self.rng.standard_normal((count, self.dim, self.dim))
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
        flip = np.linalg.det(q) < 0
        q[flip, :, 0] *= -1.0
        return q


def sample_rotation(sampler: RotationSampler) -> np.ndarray:
    return sampler.rotations(1)[0]


def sphere_sample(dim: int, radius: float, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    """Uniform point(s) on the sphere of the given radius, by normalising Gaussian vectors."""
    shape = (dim,) if count is None else (count, dim)
    z = rng.standard_normal(shape)
    return radius * z / np.linalg.norm(z, axis=-1, keepdims=True)


def subsphere_sample(sub: SubsphereMeasure, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    """
    Uniform point(s) from a SubsphereMeasure: a Gaussian vector projected onto the orthogonal
    complement of the constraints, normalised to the radius and moved to the center.
    """
    shape = (sub.dim,) if count is None else (count, sub.dim)
    z = rng.standard_normal(shape)
    if len(sub.basis):
        z = z - (z @ sub.basis.T) @ sub.basis
    z = z / np.linalg.norm(z, axis=-1, keepdims=True)
    return sub.center + sub.radius * z


def simplex_gram(directions: Any) -> tuple[tuple[tuple[float, ...], ...], tuple[float, ...]]:
    """
    Gram data of unit directions u_1..u_n: β_{k,i} = u_k·e_i over the Gram-Schmidt basis e_i of
    u_1..u_{k-1}, and d_k the distance from u_k to that span (d_1 = 1).

    :return: (betas, distances) with betas[k] of length k
    :rtype: tuple[tuple[tuple[float, ...], ...], tuple[float, ...]]
    """
    u = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    norms = np.linalg.norm(u, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise DegenerateConfigurationError(f"directions must be unit vectors, got norms {norms.tolist()}")
    basis: list[np.ndarray] = []
    betas: list[tuple[float, ...]] = []
    dists: list[float] = []
    for k, v in enumerate(u):
        coeffs = tuple(float(v @ e) for e in basis)
        w = v - sum((c * e for c, e in zip(coeffs, basis)), np.zeros_like(v))
        dk = float(np.linalg.norm(w))
        if dk < INDEPENDENCE_TOL:
            raise DegenerateConfigurationError(f"direction {k} is linearly dependent on the previous ones")
        betas.append(coeffs)
        dists.append(dk)
        basis.append(w / dk)
    return tuple(betas), tuple(dists)


def annulus_field(grid: Grid, r: float, width_cells: float = 1.0) -> GridField:
    """Displacements with ||y| - r| <= width/2 cells, normalised to mass 1; no resolution check."""
    mask = np.abs(grid.radius() - r) <= 0.5 * width_cells * grid.spacing + 1e-12 * grid.spacing
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise DomainError(f"annulus of radius {r:.4g} and width {width_cells:g} cells contains no grid point")
    values = mask / (count * grid.cell_volume)
    return GridField(grid, values, {"radius": r, "shell_width": width_cells, "support": count})


def discretize_sphere(grid: Grid, r: float, shell_width: float = 1.0) -> GridField:
    """
    Annulus surrogate of σ_r: the shell r ± w/2 cells, total mass 1.

    :param grid: displacement grid
    :type grid: Grid
    :param r: sphere radius, at least 4 cells
    :type r: float
    :param shell_width: shell width w in cells, at least 1
    :type shell_width: float
    :return: normalised shell indicator
    :rtype: GridField
    """
    if r < MIN_SHELL_RADIUS_CELLS * grid.spacing:
        raise DomainError(
            f"sphere radius {r:.4g} is under-resolved: need at least {MIN_SHELL_RADIUS_CELLS:g} cells "
            f"({MIN_SHELL_RADIUS_CELLS * grid.spacing:.4g})"
        )
    if shell_width < 1.0:
        raise DomainError(f"shell width must be at least one cell, got {shell_width!r}")
    return annulus_field(grid, r, shell_width)


def smoothed_sphere_field(grid: Grid, r: float, s: float) -> GridField:
    """Field with spectrum σ̂(rξ)·ĝ(sξ), built spectrally; mass exactly 1."""
    if not r > 0:
        raise DomainError(f"sphere radius must be positive, got {r!r}")
    if not s > 0:
        raise DomainError(f"smoothing scale must be positive, got {s!r}")
    meta: dict[str, Any] = {"radius": r, "smoothing": s, "under_resolved": not is_resolved(s, grid)}
    if meta["under_resolved"]:
        logger.warning("smoothing %.4g is under-resolved (%.2f cells)", s, s / grid.spacing)

    def _spec(axes: list[np.ndarray]) -> np.ndarray:
        rho2 = sum(x * x for x in axes)
        return sphere_profile(grid.dim, r * np.sqrt(rho2)) * np.exp(-math.pi * s * s * rho2)

    return spectral_field(grid, _spec, **meta)


def sphere_field(grid: Grid, r: float) -> GridField:
    """
    Field with spectrum σ̂(rξ) on the grid frequencies; mass exactly 1. The ε → 0 limit of
    smoothed_sphere_field, usable wherever the form is a pure convolution.
    """
    if not r > 0:
        raise DomainError(f"sphere radius must be positive, got {r!r}")

    def _spec(axes: list[np.ndarray]) -> np.ndarray:
        return sphere_profile(grid.dim, r * np.sqrt(sum(x * x for x in axes)))

    return spectral_field(grid, _spec, radius=r, smoothing=0.0)


def smoothed_sphere_laplacian_field(grid: Grid, r: float, s: float) -> GridField:
    """σ_r * k_s built spectrally: σ̂(rξ)·(-4π²s²|ξ|²)·ĝ(sξ). Mass exactly 0."""
    if not (r > 0 and s > 0):
        raise DomainError(f"radius and scale must be positive, got r={r!r}, s={s!r}")

    def _spec(axes: list[np.ndarray]) -> np.ndarray:
        rho2 = sum(x * x for x in axes)
        lap = -4.0 * math.pi**2 * s * s * rho2 * np.exp(-math.pi * s * s * rho2)
        return sphere_profile(grid.dim, r * np.sqrt(rho2)) * lap

    return spectral_field(grid, _spec, radius=r, smoothing=s)
