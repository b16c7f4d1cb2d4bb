from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.integrate import trapezoid

from ramseyforms.core.counting import (
    BoxSpec,
    CubicalTensor,
    SimplexSpec,
    TreeSpec,
    box_form,
    check_wraparound,
    count_form,
    reference_count,
    tree_form,
)
from ramseyforms.core.errors import ConfigurationError, DimensionError, DomainError
from ramseyforms.core.grid import Grid, GridField, lp_norm
from ramseyforms.core.kernels import AnisotropyParams, KernelKind, grid_spectrum
from ramseyforms.core.parallel import ordered_map
from ramseyforms.core.spherical import smoothed_sphere_field, smoothed_sphere_laplacian_field

logger = logging.getLogger(__name__)

# Θ and square-function bands start where the smallest kernel spans this many cells.
BAND_LOW_CELLS = 3.0
BAND_HIGH_SIDES = 2.0
POSITIVITY_RATIO = 1e-6
DOUBLING_RATIO = 0.7
DOUBLING_FLOOR = 1e-9


@dataclass(frozen=True)
class ScaleLadder:
    """Lacunary scales λ_1 < ... < λ_J (ratio >= 2), smoothing ε and θ = 10^{-1/a_n}·e^{-1}."""

    scales: tuple[float, ...]
    eps: float
    exponent: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "scales", tuple(float(x) for x in self.scales))
        if not self.scales:
            raise ConfigurationError("a scale ladder needs at least one scale")
        if self.scales[0] <= 0:
            raise ConfigurationError("ladder scales must be positive")
        for lo, hi in zip(self.scales, self.scales[1:]):
            if hi < 2.0 * lo * (1.0 - 1e-12):
                raise ConfigurationError(f"ladder is not lacunary: {hi:g} < 2·{lo:g}")
        if not 0.0 < self.eps <= 1.0:
            raise ConfigurationError(f"ladder ε must lie in (0, 1], got {self.eps!r}")
        if not self.exponent > 0:
            raise ConfigurationError(f"ladder exponent must be positive, got {self.exponent!r}")

    @classmethod
    def geometric(cls, start: float, ratio: float, count: int, eps: float, exponent: float) -> ScaleLadder:
        return cls(tuple(start * ratio**j for j in range(count)), eps, exponent)

    @property
    def J(self) -> int:
        return len(self.scales)

    @property
    def theta(self) -> float:
        return 10.0 ** (-1.0 / self.exponent) / math.e

    def interval(self, j: int, t: float) -> tuple[float, float]:
        lo = self.theta * t * self.scales[j]
        return lo, math.e * lo


@dataclass(frozen=True)
class QuadratureSpec:
    """Log-uniform trapezoid rules for the ds/s, dt/t and dγ/γ² integrals."""

    ds_per_decade: int = 64
    dt_per_decade: int = 64
    gamma_nodes: int = 200
    gamma_max: float = 1e3
    min_nodes: int = 16

    def __post_init__(self) -> None:
        if min(self.ds_per_decade, self.dt_per_decade, self.gamma_nodes, self.min_nodes) < 16:
            raise ConfigurationError("quadrature node counts must be at least 16")

    def doubled(self) -> QuadratureSpec:
        return QuadratureSpec(2 * self.ds_per_decade, 2 * self.dt_per_decade, 2 * self.gamma_nodes, self.gamma_max, self.min_nodes)

    def log_nodes(self, lo: float, hi: float, per_decade: int | None = None) -> np.ndarray:
        """Uniform nodes in log-scale over [lo, hi]."""
        if not 0 < lo < hi:
            raise DomainError(f"need 0 < lo < hi, got [{lo!r}, {hi!r}]")
        rate = self.ds_per_decade if per_decade is None else per_decade
        count = max(self.min_nodes, int(math.ceil(math.log10(hi / lo) * rate)) + 1)
        return np.linspace(math.log(lo), math.log(hi), count)

    def radius(self, ladder: ScaleLadder, j: int, s: float, t: float) -> float:
        """r(j, s, t) = ((tλ_j)^{2a} - s^{2a})^{1/2a}, defined for 0 < s <= eθtλ_j."""
        lo, hi = ladder.interval(j, t)
        if not 0 < s <= hi * (1.0 + 1e-12):
            raise DomainError(f"s={s:.6g} outside (0, eθtλ_j] = (0, {hi:.6g}]")
        a2 = 2.0 * ladder.exponent
        return ((t * ladder.scales[j]) ** a2 - s**a2) ** (1.0 / a2)


def theta_interval_mass(ladder: ScaleLadder, t: float, j: int, quad: QuadratureSpec | None = None) -> float:
    """∫ ds/s over [θtλ_j, eθtλ_j], by quadrature; equals 1."""
    q = quad or QuadratureSpec()
    lo, hi = ladder.interval(j, t)
    u = q.log_nodes(lo, hi)
    return float(trapezoid(np.ones_like(u), u))


def doubling_ok(coarse: float, fine: float) -> bool:
    """A node-doubled residual converges when it drops to 0.7x the coarse one or below 1e-9."""
    return fine <= DOUBLING_RATIO * coarse or fine < DOUBLING_FLOOR


# ---------------------------------------------------------------- Θ forms


def _square_form_weight(grid: Grid, sigma: float) -> np.ndarray:
    """2·Σ_l |ĥ^(l)_{σ/√2}|² on the full frequency grid; equals -k̂_σ."""
    t = sigma / math.sqrt(2.0)
    return 2.0 * sum(np.abs(grid_spectrum(KernelKind.deriv(l), t, grid)) ** 2 for l in range(grid.dim))


def _gauss_weight(grid: Grid, sigma: float) -> np.ndarray:
    return np.real(grid_spectrum(KernelKind.gauss(), sigma, grid))


class _BoxSpectra:
    """Precomputed spectral data of ∫ℱ·Π K_k(x_k^0 - x_k^1) for Gaussian-family kernels."""

    def __init__(self, f: GridField, plane_dims: Sequence[int]) -> None:
        self.f = f
        self.dims = tuple(plane_dims)
        if f.dim != sum(self.dims):
            raise DimensionError(f"field of dimension {f.dim} does not match planes {self.dims}")
        self.h = f.grid.spacing
        self.planes = [f.grid.with_dim(p) for p in self.dims]
        self.norm = lp_norm(f, 2 ** len(self.dims)) ** (2 ** len(self.dims))
        if len(self.dims) == 1:
            self.power = np.abs(sfft.fftn(f.values)) ** 2
            self.scale = self.h ** self.dims[0] / f.grid.size
            self.zero_mode = self.scale * float(self.power.flat[0])
        elif len(self.dims) == 2:
            tensor = CubicalTensor(f, (self.dims[0], self.dims[1]))
            # energies[m] shifts the plane that carries the Gaussian in the m-th Θ slice
            self.energies = {1: tensor.pair_energy(), 0: tensor.swapped().pair_energy()}
            p1, p2 = self.dims
            m2 = self.planes[1].size
            self.zero_mode = self.h ** (2 * p1 + p2) / (m2 * f.side**p1) * float(np.sum(self.energies[1][(Ellipsis,) + (0,) * p2]))
        else:
            raise DomainError(f"Θ forms are implemented for n in {{1, 2}}, got n={len(self.dims)}")

    def _paired(self, m_gauss_plane: int, sigma_shift: float, freq_weight: np.ndarray) -> float:
        """h^{2p_s+p_f}/M_f·Σ_δ G_σ(δ)·Σ_η W[δ, η]·weight(η), shift plane s, frequency plane f."""
        shift = 0 if m_gauss_plane == 0 else 1
        other = 1 - shift
        energy = self.energies[other]
        p_s, p_f = self.dims[shift], self.dims[other]
        plane = self.planes[shift]
        inner = np.sum(energy * freq_weight, axis=tuple(range(p_s, p_s + p_f)))
        weights = sfft.irfftn(_half(_gauss_weight(plane, sigma_shift), plane), s=plane.shape) / plane.cell_volume
        m_f = self.planes[other].size
        return float(np.sum(weights * inner)) * self.h ** (2 * p_s + p_f) / m_f

    def gauss_form(self, sigmas: Sequence[float]) -> float:
        """B = ∫ℱ·Π g_{σ_k}(x_k^0 - x_k^1)."""
        if len(self.dims) == 1:
            return self.scale * float(np.sum(self.power * _gauss_weight(self.planes[0], sigmas[0])))
        return self._paired(0, sigmas[0], _gauss_weight(self.planes[1], sigmas[1]))

    def theta_slice(self, m: int, sigmas: Sequence[float]) -> float:
        """-∫ℱ·k_{σ_m}·Π_{k≠m} g_{σ_k}, as a sum of squares."""
        if len(self.dims) == 1:
            return self.scale * float(np.sum(self.power * _square_form_weight(self.planes[0], sigmas[0])))
        gauss_plane = 1 - m
        return self._paired(gauss_plane, sigmas[gauss_plane], _square_form_weight(self.planes[m], sigmas[m]))


def _half(full: np.ndarray, grid: Grid) -> np.ndarray:
    return full[(Ellipsis, slice(0, grid.cells // 2 + 1))]


def theta_band(params: AnisotropyParams, gammas: Sequence[float], grid: Grid) -> tuple[float, float]:
    """[s_lo, s_hi]: the smallest kernel spans 3 cells at s_lo, every kernel exceeds 2R at s_hi."""
    lo = max((BAND_LOW_CELLS * grid.spacing / (b * g)) ** (1.0 / a) for a, b, g in zip(params.a, params.b, gammas))
    hi = max((BAND_HIGH_SIDES * grid.side / (b * g)) ** (1.0 / a) for a, b, g in zip(params.a, params.b, gammas))
    return lo, max(10.0 * lo, hi)


def _sigmas(params: AnisotropyParams, gammas: Sequence[float], s: float) -> list[float]:
    return [s**a * b * g for a, b, g in zip(params.a, params.b, gammas)]


def _theta_pieces(
    spectra: _BoxSpectra, params: AnisotropyParams, gammas: Sequence[float], quad: QuadratureSpec
) -> dict[str, Any]:
    grid = spectra.f.grid
    s_lo, s_hi = theta_band(params, gammas, grid)
    u = quad.log_nodes(s_lo, s_hi)
    bands = []
    for m in range(params.n):
        values = [spectra.theta_slice(m, _sigmas(params, gammas, math.exp(x))) for x in u]
        bands.append(float(trapezoid(values, u)))
    b_lo = spectra.gauss_form(_sigmas(params, gammas, s_lo))
    b_hi = spectra.gauss_form(_sigmas(params, gammas, s_hi))
    tail_lo = 2.0 * math.pi * (spectra.norm - b_lo)
    tail_hi = 2.0 * math.pi * (b_hi - spectra.zero_mode)
    return {
        "band": [s_lo, s_hi],
        "nodes": int(u.size),
        "bands": bands,
        "tail_low": tail_lo,
        "tail_high": tail_hi,
        "norm": spectra.norm,
        "zero_mode": spectra.zero_mode,
    }


def _check_gammas(params: AnisotropyParams, gammas: Sequence[float]) -> None:
    if len(gammas) != params.n or any(not g > 0 for g in gammas):
        raise DomainError(f"need {params.n} positive γ values, got {list(gammas)}")


def theta_form(
    f: GridField,
    params: AnisotropyParams,
    m: int,
    gammas: Sequence[float],
    quad: QuadratureSpec | None = None,
    plane_dims: Sequence[int] | None = None,
) -> dict[str, Any]:
    """
    Θ^{n,m}_γ(f) for the factor m (0-based), evaluated slice by slice in its sum-of-squares form.

    The ds/s integral runs over the resolvable band; for n = 1 the two tails are added exactly
    (they telescope), for n = 2 they are bounded by (2π/a_m)·(tail mass) and reported.

    :return: value, band part, tail (n = 1) or tail bound, the upper bound
        (2π/a_m)·‖f‖^{2^n}_{2^n} and warnings
    :rtype: dict[str, Any]
    """
    q = quad or QuadratureSpec()
    _check_gammas(params, gammas)
    if not 0 <= m < params.n:
        raise DomainError(f"factor index m must lie in 0..{params.n - 1}, got {m}")
    dims = tuple(plane_dims) if plane_dims else (2,) * params.n
    spectra = _BoxSpectra(f, dims)
    pieces = _theta_pieces(spectra, params, gammas, q)
    tails = pieces["tail_low"] + pieces["tail_high"]
    band = pieces["bands"][m]
    warnings: list[str] = []
    if params.n == 1:
        tail = tails / params.a[0]
        value = band + tail
        tail_bound = abs(tail)
    else:
        tail_bound = abs(tails) / params.a[m]
        value = band
        warnings.append(f"Θ tails outside s in [{pieces['band'][0]:.4g}, {pieces['band'][1]:.4g}] are bounded by {tail_bound:.4g}, not evaluated")
        logger.info("theta_form m=%d: tail bounded by %.4g", m, tail_bound)
    return {
        "value": value,
        "band_value": band,
        "tail_bound": tail_bound,
        "upper_bound": 2.0 * math.pi / params.a[m] * spectra.norm,
        "band": pieces["band"],
        "nodes": pieces["nodes"],
        "warnings": warnings,
    }


def verify_theta_identity(
    f: GridField,
    params: AnisotropyParams,
    gammas: Sequence[float],
    quad: QuadratureSpec | None = None,
    plane_dims: Sequence[int] | None = None,
) -> dict[str, Any]:
    """
    Residual of Σ_m a_m·Θ^{n,m} = 2π·‖f‖^{2^n}_{2^n}.

    On the torus the zero frequency is invisible to k, so the evaluated left side is compared with
    2π(‖f‖^{2^n} - U), U the infinite-scale limit; the comparison with the plain right side is
    reported as "residual_plain".
    """
    q = quad or QuadratureSpec()
    _check_gammas(params, gammas)
    dims = tuple(plane_dims) if plane_dims else (2,) * params.n
    spectra = _BoxSpectra(f, dims)
    pieces = _theta_pieces(spectra, params, gammas, q)
    band_sum = sum(a * v for a, v in zip(params.a, pieces["bands"]))
    lhs = band_sum + pieces["tail_low"] + pieces["tail_high"]
    rhs = 2.0 * math.pi * (pieces["norm"] - pieces["zero_mode"])
    plain = 2.0 * math.pi * pieces["norm"]
    return {
        "lhs": lhs,
        "rhs": rhs,
        "rhs_plain": plain,
        "residual": abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs - rhs),
        "residual_plain": abs(lhs - plain) / plain if plain > 0 else abs(lhs - plain),
        "thetas": pieces["bands"],
        "band": pieces["band"],
        "nodes": pieces["nodes"],
        "tail_low": pieces["tail_low"],
        "tail_high": pieces["tail_high"],
    }


def square_identity(f: GridField, a: float, b: float, quad: QuadratureSpec | None = None) -> dict[str, Any]:
    """
    Residual of ∫_0^∞ Σ_l ‖f * h^(l)_{s^a b}‖² ds/s = (π/a)‖f‖².

    The band integral is exact up to quadrature; the tails telescope to
    (π/a)(‖f‖² - ‖f*g_{σ_lo}‖²) and (π/a)(‖f*g_{σ_hi}‖² - R^{-d}|f̂(0)|²).
    """
    if not (a > 0 and b > 0):
        raise DomainError(f"need a > 0 and b > 0, got a={a!r}, b={b!r}")
    q = quad or QuadratureSpec()
    grid = f.grid
    power = np.abs(sfft.fftn(f.values) * grid.cell_volume) ** 2 / grid.side**grid.dim
    rho2 = sum(x * x for x in grid.frequencies())
    norm2 = lp_norm(f, 2) ** 2
    zero = float(power.flat[0])

    def _smoothed_norm(sigma: float) -> float:
        return float(np.sum(power * np.exp(-2.0 * math.pi * sigma * sigma * rho2)))

    s_lo = (BAND_LOW_CELLS * grid.spacing / b) ** (1.0 / a)
    s_hi = max(10.0 * s_lo, (BAND_HIGH_SIDES * grid.side / b) ** (1.0 / a))
    u = q.log_nodes(s_lo, s_hi)
    values = []
    for x in u:
        sigma = math.exp(a * x) * b
        weight = sum(np.abs(grid_spectrum(KernelKind.deriv(l), sigma, grid)) ** 2 for l in range(grid.dim))
        values.append(float(np.sum(power * weight)))
    band = float(trapezoid(values, u))
    tail_lo = math.pi / a * (norm2 - _smoothed_norm(s_lo**a * b))
    tail_hi = math.pi / a * (_smoothed_norm(s_hi**a * b) - zero)
    lhs = band + tail_lo + tail_hi
    rhs = math.pi / a * (norm2 - zero)
    plain = math.pi / a * norm2
    return {
        "lhs": lhs,
        "rhs": rhs,
        "rhs_plain": plain,
        "residual": abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs - rhs),
        "residual_plain": abs(lhs - plain) / plain if plain > 0 else abs(lhs - plain),
        "band": [s_lo, s_hi],
        "nodes": int(u.size),
        "tail_low": tail_lo,
        "tail_high": tail_hi,
    }


# ---------------------------------------------------------------- decomposition


def _count_options(opts: dict[str, Any]) -> dict[str, Any]:
    keys = ("shell_width", "coverage", "samples", "seed", "workers", "singular")
    return {k: opts[k] for k in keys if k in opts}


def decompose(f: GridField, spec: BoxSpec | TreeSpec | SimplexSpec, lam: float, eps: float, **opts: Any) -> dict[str, Any]:
    """
    One row of N⁰ = N¹ + (Nᵉ - N¹) + (N⁰ - Nᵉ); N⁰ is the annulus surrogate.

    Monte Carlo forms reuse the seed across the three evaluations (common random rotations) and
    report their standard errors.
    """
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"decomposition ε must lie in (0, 1], got {eps!r}")
    kw = _count_options(opts)
    n1, se1 = count_form(f, spec, lam, 1.0, **kw)
    ne, see = (n1, se1) if eps == 1.0 else count_form(f, spec, lam, eps, **kw)
    n0, se0 = count_form(f, spec, lam, 0.0, **kw)
    row: dict[str, Any] = {
        "lam": float(lam),
        "eps": float(eps),
        "n1": n1,
        "ne": ne,
        "n0": n0,
        "error": ne - n1,
        "uniform": n0 - ne,
    }
    if se1 is not None:
        row.update({"n1_stderr": se1, "ne_stderr": see, "n0_stderr": se0})
    return row


@dataclass
class DecompositionReport:
    """Rows of decompose over a ladder plus the ladder sum Σ_j |Nᵉ - N¹| and its growth slope."""

    rows: list[dict[str, Any]] = field(default_factory=list)
    ladder_sum: float = 0.0
    slope: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def check_bookkeeping(self, rtol: float = 1e-12) -> bool:
        for r in self.rows:
            total = r["n1"] + r["error"] + r["uniform"]
            if abs(total - r["n0"]) > rtol * max(abs(r["n0"]), 1.0):
                return False
        return True


def growth_slope(per_scale: Sequence[float]) -> float | None:
    """Least-squares slope of log(cumulative sum) against log J; None without two positive points."""
    cum = np.cumsum(per_scale)
    js = np.arange(1, len(cum) + 1, dtype=np.float64)
    mask = cum > 0
    if np.count_nonzero(mask) < 2:
        return None
    return float(np.polyfit(np.log(js[mask]), np.log(cum[mask]), 1)[0])


def error_ladder_sum(f: GridField, spec: BoxSpec | TreeSpec | SimplexSpec, ladder: ScaleLadder, **opts: Any) -> dict[str, Any]:
    """
    Σ_j |Nᵉ_{λ_j} - N¹_{λ_j}| with its per-scale values and the log-log growth slope of the
    cumulative sum (below 1 means sublinear growth in J).
    """
    for lam in ladder.scales:
        check_wraparound(f.grid, spec.params.scales(lam))
    kw = _count_options(opts)
    workers = int(opts.get("workers", 1))

    def _one(lam: float) -> float:
        if ladder.eps == 1.0:
            return 0.0
        n1, _ = count_form(f, spec, lam, 1.0, **kw)
        ne, _ = count_form(f, spec, lam, ladder.eps, **kw)
        return abs(ne - n1)

    # Monte Carlo forms parallelise internally
    outer = 1 if isinstance(spec, SimplexSpec) else workers
    if outer > 1:
        kw["workers"] = 1
    per_scale = ordered_map(_one, ladder.scales, outer)
    return {
        "sum": float(math.fsum(per_scale)),
        "per_scale": [float(x) for x in per_scale],
        "slope": growth_slope(per_scale),
        "scales": list(ladder.scales),
        "eps": ladder.eps,
    }


def covering_multiplicity(ladder: ScaleLadder, t: float = 1.0, points: int = 1000) -> int:
    """Largest number of intervals [θtλ_j, eθtλ_j] containing one sampled s."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t!r}")
    intervals = [ladder.interval(j, t) for j in range(ladder.J)]
    lo = intervals[0][0] / math.e
    hi = intervals[-1][1] * math.e
    s = np.concatenate([np.geomspace(lo, hi, points), np.array([x for iv in intervals for x in iv])])
    counts = np.zeros(s.shape, dtype=int)
    for a, b in intervals:
        counts += (s >= a) & (s <= b)
    return int(np.max(counts))


def error_form(
    f: GridField,
    spec: BoxSpec | TreeSpec,
    lam: float,
    eps: float,
    quad: QuadratureSpec | None = None,
    workers: int = 1,
) -> dict[str, Any]:
    """
    Nᵉ - N¹ through the heat flow: -Σ_m (a_m/2π)∫_ε^1 N[(σ*k)_{t^{a_m}} at m, (σ*g) elsewhere] dt/t,
    against the directly computed difference.
    """
    if isinstance(spec, SimplexSpec) or not isinstance(spec, (BoxSpec, TreeSpec)):
        raise ConfigurationError("the heat-flow representation is evaluated for box and tree specs")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"ε must lie in (0, 1), got {eps!r}")
    q = quad or QuadratureSpec()
    scales = spec.params.scales(lam)
    is_box = isinstance(spec, BoxSpec)
    grids = [f.grid.with_dim(p) for p in spec.plane_dims] if is_box else [f.grid] * spec.params.n
    check_wraparound(f.grid, scales)

    def _form(kernels: list[GridField]) -> float:
        if is_box:
            return box_form(f, kernels, spec.plane_dims, coverage=1.0)
        return tree_form(f, spec, kernels)

    def _kernels(t: float, m: int | None) -> list[GridField]:
        out = []
        for k, (grid, a, rho) in enumerate(zip(grids, spec.params.a, scales)):
            if k == m:
                out.append(smoothed_sphere_laplacian_field(grid, rho, t**a * rho))
            else:
                out.append(smoothed_sphere_field(grid, rho, t**a * rho))
        return out

    u = q.log_nodes(eps, 1.0, q.dt_per_decade)
    per_factor = []
    for m, a in enumerate(spec.params.a):
        values = ordered_map(lambda x, m=m: _form(_kernels(math.exp(x), m)), list(u), workers)
        per_factor.append(-a / (2.0 * math.pi) * float(trapezoid(values, u)))
    estimate = float(math.fsum(per_factor))
    direct = _form(_kernels(eps, None)) - _form(_kernels(1.0, None))
    scale = max(abs(direct), 1e-12 * reference_count(f.grid))
    return {
        "estimate": estimate,
        "direct": direct,
        "per_factor": per_factor,
        "residual": abs(estimate - direct) / scale,
        "nodes": int(u.size),
    }


# ---------------------------------------------------------------- sweeps


def _lambda0(lambdas: Sequence[float], counts: Sequence[float], threshold: float) -> float | None:
    """Smallest sampled λ from which every count stays above the threshold."""
    found = None
    for lam, value in zip(reversed(lambdas), reversed(counts)):
        if value > threshold:
            found = lam
        else:
            break
    return found


def _zero_windows(lambdas: Sequence[float], positive: Sequence[bool]) -> list[list[float]]:
    windows: list[list[float]] = []
    current: list[float] = []
    for lam, ok in zip(lambdas, positive):
        if not ok:
            current.append(lam)
        elif current:
            windows.append([current[0], current[-1]])
            current = []
    if current:
        windows.append([current[0], current[-1]])
    return windows


def _refinements(cells: int, size: int) -> int:
    """Number of grid doublings taking cells to size."""
    steps = 0
    n = cells
    while n < size:
        n *= 2
        steps += 1
    if n != size or steps == 0:
        raise ConfigurationError(f"refinement size {size} must be {cells}·2^k with k ≥ 1")
    return steps


def lambda0_sweep(
    f: GridField,
    spec: BoxSpec | TreeSpec | SimplexSpec,
    lambdas: Sequence[float],
    eps_list: Sequence[float] = (),
    widths: Sequence[float] = (2.0, 1.0),
    refine: bool = True,
    sizes: Sequence[int] = (),
    **opts: Any,
) -> dict[str, Any]:
    """
    λ₀ estimate from the singular counts N⁰_λ over a λ grid, with stability under the shell widths
    and under grid refinement.

    A count is positive when it exceeds 1e-6·R^dim. λ₀ is None when the last sampled λ is not
    positive ("no λ₀ within sweep"). The refinement grids are the cell counts in sizes plus 2N when
    refine is set; each must be N·2^k, and f is carried over by cell replication.
    """
    lams = sorted(float(x) for x in lambdas)
    if not lams:
        raise ConfigurationError("the λ grid is empty")
    for lam in lams:
        check_wraparound(f.grid, spec.params.scales(lam))
    extra = sorted({int(n) for n in sizes} | ({2 * f.cells} if refine else set()))
    steps = {n: _refinements(f.cells, n) for n in extra}
    kw = _count_options(opts)
    kw.pop("shell_width", None)
    threshold = POSITIVITY_RATIO * reference_count(f.grid)
    primary_width = float(widths[-1])
    warnings: list[str] = []

    def _sweep(field_: GridField, width: float) -> list[float]:
        return [count_form(field_, spec, lam, 0.0, shell_width=width, **kw)[0] for lam in lams]

    counts = {w: _sweep(f, float(w)) for w in widths}
    primary = counts[primary_width]
    rows = []
    for i, lam in enumerate(lams):
        row: dict[str, Any] = {"lam": lam, "n0": primary[i], "positive": primary[i] > threshold}
        for w in widths:
            if float(w) != primary_width:
                row[f"n0_width_{float(w):g}"] = counts[w][i]
        for e in eps_list:
            row[f"ne_{float(e):g}"] = count_form(f, spec, lam, float(e), **kw)[0]
        rows.append(row)

    lam0 = _lambda0(lams, primary, threshold)
    by_width = {f"{float(w):g}": _lambda0(lams, counts[w], threshold) for w in widths}
    stable_width = len(set(by_width.values())) == 1
    by_size: dict[str, float | None] = {}
    for n in extra:
        fine = f
        for _ in range(steps[n]):
            fine = fine.refined()
        fine_counts = _sweep(fine, primary_width)
        by_size[str(n)] = _lambda0(lams, fine_counts, POSITIVITY_RATIO * reference_count(fine.grid))
        for row, value in zip(rows, fine_counts):
            row[f"n0_cells_{n}"] = value
    refined_lam0 = by_size[str(extra[0])] if extra else None
    stable_refine = all(v == lam0 for v in by_size.values()) if extra else None
    if lam0 is None:
        warnings.append("no λ₀ within sweep")
        logger.warning("λ-sweep found no positive tail among %d scales", len(lams))
    return {
        "lambda0": lam0,
        "threshold": threshold,
        "rows": rows,
        "lambda0_by_width": by_width,
        "lambda0_by_size": by_size,
        "lambda0_refined": refined_lam0,
        "stable_width": stable_width,
        "stable_refine": stable_refine,
        "stable": stable_width and stable_refine is not False,
        "zero_windows": _zero_windows(lams, [r["positive"] for r in rows]),
        "warnings": warnings,
    }


def uniform_scaling_slope(
    f: GridField, spec: BoxSpec | TreeSpec | SimplexSpec, lam: float, eps_list: Sequence[float], **opts: Any
) -> dict[str, Any]:
    """
    Log-log slope of |N⁰ - Nᵉ| against ε.

    N⁰ defaults to the spectral singular surrogate, the exact ε → 0 limit of the smoothed kernels on
    the grid. Pass singular="annulus" to measure against the counting surrogate instead.
    """
    eps = sorted(float(e) for e in eps_list)
    if len(eps) < 2 or eps[0] <= 0:
        raise DomainError("need at least two positive ε values")
    kw = _count_options({"singular": "spectral", **opts})
    n0, _ = count_form(f, spec, lam, 0.0, **kw)
    uniform = [abs(n0 - count_form(f, spec, lam, e, **kw)[0]) for e in eps]
    logs = np.log(np.maximum(uniform, np.finfo(float).tiny))
    slope = float(np.polyfit(np.log(eps), logs, 1)[0])
    return {"slope": slope, "eps": eps, "uniform": uniform, "n0": n0}
