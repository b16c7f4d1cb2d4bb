from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.integrate import trapezoid

from ramseyforms.core.errors import ConfigurationError, DimensionError, DomainError, QuadratureError
from ramseyforms.core.grid import Grid, GridField, convolve

logger = logging.getLogger(__name__)

GAUSS = "gauss"
GAUSS_DERIV = "gauss_deriv"
GAUSS_LAPLACIAN = "gauss_laplacian"
_TAGS = (GAUSS, GAUSS_DERIV, GAUSS_LAPLACIAN)

# Sampling below this many grid cells is flagged as under-resolved.
MIN_RESOLVED_CELLS = 2.0


@dataclass(frozen=True)
class KernelKind:
    """
    One member of the Gaussian family: g(x) = exp(-π|x|²), its partial derivative along a
    (0-based) axis, or its Laplacian.
    """

    tag: str
    axis: int | None = None

    def __post_init__(self) -> None:
        if self.tag not in _TAGS:
            raise ConfigurationError(f"unknown kernel tag {self.tag!r}; expected one of {_TAGS}")
        if self.tag == GAUSS_DERIV:
            if self.axis is None or self.axis < 0:
                raise ConfigurationError("derivative kernels need a nonnegative axis")
        elif self.axis is not None:
            raise ConfigurationError(f"{self.tag} kernels take no axis")

    @classmethod
    def gauss(cls) -> KernelKind:
        return cls(GAUSS)

    @classmethod
    def deriv(cls, axis: int) -> KernelKind:
        return cls(GAUSS_DERIV, axis)

    @classmethod
    def laplacian(cls) -> KernelKind:
        return cls(GAUSS_LAPLACIAN)

    def check_dim(self, dim: int) -> None:
        if self.axis is not None and self.axis >= dim:
            raise DimensionError(f"derivative axis {self.axis} outside dimension {dim}")


@dataclass(frozen=True)
class DilationLaw:
    """Scale law t -> t^a·b."""

    a: float
    b: float = 1.0

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ConfigurationError(f"dilation law needs a > 0 and b > 0, got a={self.a!r}, b={self.b!r}")

    def scale(self, t: float) -> float:
        return t ** self.a * self.b


@dataclass(frozen=True)
class AnisotropyParams:
    """Exponents a_k and coefficients b_k of a configuration, one pair per factor or edge."""

    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if not self.a:
            raise ConfigurationError("anisotropy parameters need at least one exponent")
        if len(self.a) != len(self.b):
            raise ConfigurationError(f"got {len(self.a)} exponents but {len(self.b)} coefficients")
        for a, b in zip(self.a, self.b):
            DilationLaw(a, b)

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def total(self) -> float:
        return float(sum(self.a))

    @property
    def smallest(self) -> float:
        return float(min(self.a))

    def laws(self) -> tuple[DilationLaw, ...]:
        return tuple(DilationLaw(a, b) for a, b in zip(self.a, self.b))

    def scales(self, lam: float) -> tuple[float, ...]:
        return tuple(law.scale(lam) for law in self.laws())

    def permuted(self, order: Sequence[int]) -> AnisotropyParams:
        return AnisotropyParams(tuple(self.a[i] for i in order), tuple(self.b[i] for i in order))


def is_resolved(t: float, grid: Grid) -> bool:
    return t >= MIN_RESOLVED_CELLS * grid.spacing


def _flag_resolution(t: float, grid: Grid, what: str) -> dict[str, Any]:
    cells = t / grid.spacing
    meta: dict[str, Any] = {"scale": t, "scale_cells": cells, "under_resolved": not is_resolved(t, grid)}
    if meta["under_resolved"]:
        logger.warning("%s at scale %.4g is under-resolved (%.2f cells)", what, t, cells)
    return meta


def _gauss_profiles(t: float, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """1D periodized t^{-1}exp(-πx²/t²) and its first two derivatives at wrapped displacements."""
    x = np.arange(grid.cells) * grid.spacing
    x = np.where(x >= grid.side / 2, x - grid.side, x)
    phi = np.zeros_like(x)
    dphi = np.zeros_like(x)
    d2phi = np.zeros_like(x)
    for image in (-1, 0, 1):
        y = x + image * grid.side
        g = np.exp(-math.pi * y * y / (t * t)) / t
        phi += g
        dphi += -2.0 * math.pi * y / (t * t) * g
        d2phi += (4.0 * math.pi**2 * y * y / t**4 - 2.0 * math.pi / t**2) * g
    return phi, dphi, d2phi


def _outer(factors: Sequence[np.ndarray]) -> np.ndarray:
    return functools.reduce(np.multiply.outer, factors)


def sample_kernel(kind: KernelKind, t: float, grid: Grid) -> GridField:
    """
    Sample the periodization of g_t, h^(l)_t or k_t at the displacement lattice.

    Dilates follow f_t(x) = t^{-d} f(x/t), so h^(l)_t = t·∂_l g_t and k_t = t²·Δg_t.
    Only the 3^d nearest torus images are summed.

    :param kind: kernel family member
    :type kind: KernelKind
    :param t: scale, > 0
    :type t: float
    :param grid: grid geometry
    :type grid: Grid
    :return: sampled kernel; meta carries the resolution flag
    :rtype: GridField
    """
    if not t > 0:
        raise DomainError(f"kernel scale must be positive, got {t!r}")
    kind.check_dim(grid.dim)
    meta = _flag_resolution(t, grid, f"{kind.tag} kernel")
    phi, dphi, d2phi = _gauss_profiles(t, grid)
    d = grid.dim
    if kind.tag == GAUSS:
        values = _outer([phi] * d)
    elif kind.tag == GAUSS_DERIV:
        values = t * _outer([dphi if axis == kind.axis else phi for axis in range(d)])
    else:
        values = t * t * sum(_outer([d2phi if axis == l else phi for axis in range(d)]) for l in range(d))
    return GridField(grid, np.asarray(values).reshape(grid.shape), meta)


def _closed_form(kind: KernelKind, t: float, axes: Sequence[np.ndarray]) -> np.ndarray:
    r2 = sum(x * x for x in axes)
    g = np.exp(-math.pi * t * t * r2)
    if kind.tag == GAUSS:
        return g.astype(np.complex128)
    if kind.tag == GAUSS_DERIV:
        return 2j * math.pi * t * axes[kind.axis] * g
    return (-4.0 * math.pi**2 * t * t * r2 * g).astype(np.complex128)


def kernel_spectrum(kind: KernelKind, t: float, xi: Any) -> complex | np.ndarray:
    """
    Closed-form transform of a dilated kernel: ĝ_t(ξ) = exp(-πt²|ξ|²),
    ĥ^(l)_t(ξ) = 2πi t ξ_l ĝ_t(ξ), k̂_t(ξ) = -4π²t²|ξ|² ĝ_t(ξ).

    :param xi: frequency vector, or array of vectors along the last axis
    :type xi: Any
    """
    arr = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    kind.check_dim(arr.shape[-1])
    out = _closed_form(kind, t, [arr[..., i] for i in range(arr.shape[-1])])
    if np.ndim(xi) <= 1:
        return complex(out)
    return out


def grid_spectrum(kind: KernelKind, t: float, grid: Grid, half: bool = False) -> np.ndarray:
    """Closed-form spectrum evaluated on every grid frequency."""
    kind.check_dim(grid.dim)
    return np.broadcast_to(_closed_form(kind, t, grid.frequencies(half)), _spectrum_shape(grid, half))


def _spectrum_shape(grid: Grid, half: bool) -> tuple[int, ...]:
    if not half:
        return grid.shape
    return grid.shape[:-1] + (grid.cells // 2 + 1,)


def spectral_field(grid: Grid, spectrum_fn: Callable[[list[np.ndarray]], np.ndarray], **meta: Any) -> GridField:
    """
    Real field whose torus spectrum is spectrum_fn(frequencies); the spectrum must be real and
    even (a function of |ξ| or of squared components).
    """
    half = np.broadcast_to(np.real(spectrum_fn(grid.frequencies(half=True))), _spectrum_shape(grid, True))
    values = sfft.irfftn(half, s=grid.shape) / grid.cell_volume
    return GridField(grid, values, meta)


def heat_smooth(f: GridField, t: float) -> GridField:
    """f * g_t with the closed-form spectrum (constants are preserved exactly)."""
    if t == 0:
        return f
    if not t > 0:
        raise DomainError(f"smoothing scale must be nonnegative, got {t!r}")
    meta = _flag_resolution(t, f.grid, "heat smoothing")
    weights = np.real(grid_spectrum(KernelKind.gauss(), t, f.grid, half=True))
    values = sfft.irfftn(sfft.rfftn(f.values) * weights, s=f.grid.shape)
    return GridField(f.grid, values, meta)


def _relative_linf(lhs: np.ndarray, rhs: np.ndarray) -> float:
    scale = float(np.max(np.abs(rhs)))
    err = float(np.max(np.abs(lhs - rhs)))
    return err / scale if scale > 0 else err


def verify_convolution_identities(alpha: float, beta: float, grid: Grid) -> dict[str, Any]:
    """
    Residuals of the three Gaussian convolution identities at scales alpha, beta.

    :return: relative L∞ residuals under "gauss_gauss", "deriv_deriv", "laplacian_gauss", the absolute ones under
        "absolute", the combined scale and any resolution warnings
    :rtype: dict[str, Any]
    """
    warnings: list[str] = []
    for t in (alpha, beta):
        if not is_resolved(t, grid):
            warnings.append(f"scale {t:.4g} is below {MIN_RESOLVED_CELLS:g} grid cells")
    gamma = math.hypot(alpha, beta)
    s2 = alpha * alpha + beta * beta

    g_a = sample_kernel(KernelKind.gauss(), alpha, grid)
    g_b = sample_kernel(KernelKind.gauss(), beta, grid)
    g_c = sample_kernel(KernelKind.gauss(), gamma, grid)
    k_a = sample_kernel(KernelKind.laplacian(), alpha, grid)
    k_c = sample_kernel(KernelKind.laplacian(), gamma, grid)

    lhs1 = convolve(g_a, g_b).values
    lhs2 = sum(
        convolve(sample_kernel(KernelKind.deriv(l), alpha, grid), sample_kernel(KernelKind.deriv(l), beta, grid)).values
        for l in range(grid.dim)
    )
    lhs3 = convolve(k_a, g_b).values
    rhs1 = g_c.values
    rhs2 = (alpha * beta / s2) * k_c.values
    rhs3 = (alpha * alpha / s2) * k_c.values

    return {
        "alpha": alpha,
        "beta": beta,
        "target_scale": gamma,
        "deriv_coefficient": alpha * beta / s2,
        "gauss_gauss": _relative_linf(lhs1, rhs1),
        "deriv_deriv": _relative_linf(lhs2, rhs2),
        "laplacian_gauss": _relative_linf(lhs3, rhs3),
        "absolute": {
            "gauss_gauss": float(np.max(np.abs(lhs1 - rhs1))),
            "deriv_deriv": float(np.max(np.abs(lhs2 - rhs2))),
            "laplacian_gauss": float(np.max(np.abs(lhs3 - rhs3))),
        },
        "warnings": warnings,
    }


def heat_flow_residual(law: DilationLaw, t: float, grid: Grid, dt: float) -> float:
    """
    Relative L∞ residual of ∂_t g_{t^a b} = (a/2πt) k_{t^a b}, with the time derivative taken by
    central differences of width dt.
    """
    if not (dt > 0 and t - dt > 0):
        raise DomainError(f"need 0 < dt < t, got t={t!r}, dt={dt!r}")
    gauss = KernelKind.gauss()
    upper = sample_kernel(gauss, law.scale(t + dt), grid).values
    lower = sample_kernel(gauss, law.scale(t - dt), grid).values
    rhs = (law.a / (2.0 * math.pi * t)) * sample_kernel(KernelKind.laplacian(), law.scale(t), grid).values
    return _relative_linf((upper - lower) / (2.0 * dt), rhs)


def _schwartz_ratios(points: np.ndarray, gamma_max: float, nodes: int) -> np.ndarray:
    d = points.shape[1]
    r2 = np.sum(points * points, axis=1)
    u = np.linspace(0.0, math.log(gamma_max), nodes)
    gamma = np.exp(u)
    # dγ/γ² in the log variable is γ^{-1} du, and g_γ(x) = γ^{-d} exp(-π|x|²/γ²).
    integrand = gamma[None, :] ** (-d - 1) * np.exp(-math.pi * r2[:, None] / gamma[None, :] ** 2)
    rhs = trapezoid(integrand, u, axis=1)
    lhs = (1.0 + np.sqrt(r2)) ** (-d - 1)
    return rhs / lhs


def schwartz_domination_margin(points: Any, gamma_max: float = 1e3, nodes: int = 200) -> float:
    """
    Minimum over the sample points of ∫_1^Γ g_γ(x) dγ/γ² divided by (1+|x|)^{-d-1}.

    :param points: array of shape (k, d)
    :type points: Any
    :param gamma_max: upper truncation Γ, at least 10·(1 + max|x|)
    :type gamma_max: float
    :param nodes: log-uniform trapezoid nodes
    :type nodes: int
    :return: the minimum ratio
    :rtype: float
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    reach = 1.0 + float(np.max(np.linalg.norm(pts, axis=1)))
    if gamma_max < 10.0 * reach:
        raise DomainError(f"gamma_max={gamma_max:g} must be at least 10·(1+max|x|) = {10 * reach:g}")
    if nodes < 16:
        raise DomainError(f"need at least 16 quadrature nodes, got {nodes}")
    coarse = _schwartz_ratios(pts, gamma_max, nodes)
    fine = _schwartz_ratios(pts, gamma_max, 2 * nodes - 1)
    drift = float(np.max(np.abs(coarse - fine) / fine))
    if drift > 0.01:
        raise QuadratureError(f"node doubling changes the domination ratio by {drift:.2%}")
    return float(np.min(coarse))


def schwartz_bound_constant(dim: int, reach: float = 20.0, points: int = 20001) -> float:
    """
    C with max(g(x), |h^(l)(x)|) <= C(1+|x|)^{-d-1}, from a dense radial evaluation
    (|h^(l)(x)| <= 2π|x| g(x)).
    """
    r = np.linspace(0.0, reach, points)
    g = np.exp(-math.pi * r * r)
    envelope = np.maximum(g, 2.0 * math.pi * r * g)
    return float(np.max(envelope * (1.0 + r) ** (dim + 1)))
