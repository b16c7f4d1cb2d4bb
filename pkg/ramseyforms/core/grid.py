from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy import fft as sfft

from ramseyforms.core.errors import ConfigurationError, DimensionError, DomainError

logger = logging.getLogger(__name__)

MAX_DIM = 4
_MAGIC = b"RFGF"
_HEADER_BYTES = 20


@dataclass(frozen=True)
class Grid:
    """
    Geometry of a periodic uniform grid over [0, side)^dim.

    Functions and sets are sampled at cell centers (i + 1/2)·h. Kernels, i.e. densities of
    displacements, are sampled at i·h wrapped into [-side/2, side/2), so index 0 is the origin.
    """

    dim: int
    side: float
    cells: int

    def __post_init__(self) -> None:
        if not isinstance(self.dim, (int, np.integer)) or not 1 <= self.dim <= MAX_DIM:
            raise ConfigurationError(f"dim must be an integer in 1..{MAX_DIM}, got {self.dim!r}")
        if not (isinstance(self.side, (int, float, np.floating)) and math.isfinite(self.side) and self.side > 0):
            raise ConfigurationError(f"side must be a positive finite length, got {self.side!r}")
        n = self.cells
        if not isinstance(n, (int, np.integer)) or n < 4 or n & (n - 1):
            raise ConfigurationError(f"cells per axis must be a power of two >= 4, got {n!r}")

    @property
    def spacing(self) -> float:
        return self.side / self.cells

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dim

    @property
    def size(self) -> int:
        return self.cells ** self.dim

    @property
    def levels(self) -> int:
        return int(self.cells).bit_length() - 1

    def with_dim(self, dim: int) -> Grid:
        return Grid(dim, self.side, self.cells)

    def refined(self) -> Grid:
        return Grid(self.dim, self.side, self.cells * 2)

    def centers(self) -> list[np.ndarray]:
        c = (np.arange(self.cells) + 0.5) * self.spacing
        return np.meshgrid(*([c] * self.dim), indexing="ij", sparse=True)

    def displacements(self) -> list[np.ndarray]:
        c = np.arange(self.cells) * self.spacing
        c = np.where(c >= self.side / 2, c - self.side, c)
        return np.meshgrid(*([c] * self.dim), indexing="ij", sparse=True)

    def frequencies(self, half: bool = False) -> list[np.ndarray]:
        """
        Per-axis frequencies k/side as broadcastable arrays.

        :param half: use the rfft layout on the last axis
        :type half: bool
        """
        full = sfft.fftfreq(self.cells, d=self.spacing)
        axes = [full] * self.dim
        if half:
            axes[-1] = sfft.rfftfreq(self.cells, d=self.spacing)
        return np.meshgrid(*axes, indexing="ij", sparse=True)

    def radius(self) -> np.ndarray:
        """|x| of the wrapped displacement of every cell."""
        return np.sqrt(sum(x * x for x in self.displacements()))


@dataclass(frozen=True, eq=False)
class GridField:
    grid: Grid
    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        if arr.shape != self.grid.shape:
            raise DimensionError(f"values of shape {arr.shape} do not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("field values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def side(self) -> float:
        return self.grid.side

    @property
    def cells(self) -> int:
        return self.grid.cells

    def is_indicator(self) -> bool:
        return bool(np.all((self.values == 0.0) | (self.values == 1.0)))

    def refined(self) -> GridField:
        """Same function on a grid with twice the cells per axis (cell replication)."""
        v = self.values
        for axis in range(self.dim):
            v = np.repeat(v, 2, axis=axis)
        return GridField(self.grid.refined(), v, dict(self.meta))

    def _check_same(self, other: GridField) -> None:
        if self.grid != other.grid:
            raise DimensionError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: GridField | float) -> GridField:
        if isinstance(other, GridField):
            self._check_same(other)
            return GridField(self.grid, self.values + other.values)
        return GridField(self.grid, self.values + float(other))

    def __sub__(self, other: GridField | float) -> GridField:
        if isinstance(other, GridField):
            self._check_same(other)
            return GridField(self.grid, self.values - other.values)
        return GridField(self.grid, self.values - float(other))

    def __mul__(self, other: GridField | float) -> GridField:
        if isinstance(other, GridField):
            self._check_same(other)
            return GridField(self.grid, self.values * other.values)
        return GridField(self.grid, self.values * float(other))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectrumField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            raise DimensionError(f"spectrum of shape {arr.shape} does not match grid shape {self.grid.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def make_indicator(grid: Grid, cell_predicate: Callable[..., Any]) -> GridField:
    """
    Indicator of the cells whose centers satisfy a vectorized predicate.

    :param grid: grid geometry
    :type grid: Grid
    :param cell_predicate: called with one broadcastable coordinate array per axis
    :type cell_predicate: Callable[..., Any]
    :return: field equal to 1 exactly where the predicate holds
    :rtype: GridField
    """
    mask = np.broadcast_to(np.asarray(cell_predicate(*grid.centers()), dtype=bool), grid.shape)
    return GridField(grid, mask.astype(np.float64))


def constant_field(grid: Grid, value: float) -> GridField:
    return GridField(grid, np.full(grid.shape, float(value)))


def delta_field(grid: Grid) -> GridField:
    """Single cell of value h^{-d} at the origin: the identity for convolve."""
    v = np.zeros(grid.shape)
    v[(0,) * grid.dim] = 1.0 / grid.cell_volume
    return GridField(grid, v)


def mean(f: GridField) -> float:
    return float(np.mean(f.values))


def lp_norm(f: GridField, p: float) -> float:
    """
    Continuum-normalised L^p norm (sum |f|^p h^d)^(1/p), or max |f| for p = inf.

    :param f: field
    :type f: GridField
    :param p: exponent >= 1 or math.inf
    :type p: float
    :return: the norm
    :rtype: float
    """
    if math.isinf(p) and p > 0:
        return float(np.max(np.abs(f.values)))
    if not p >= 1:
        raise DomainError(f"p must be >= 1 or inf, got {p!r}")
    total = float(np.sum(np.abs(f.values) ** p)) * f.grid.cell_volume
    return total ** (1.0 / p)


def convolve(f: GridField, g: GridField) -> GridField:
    """Circular convolution (f*g)(x) = sum_y f(y) g(x-y) h^d, computed with real FFTs."""
    if f.grid != g.grid:
        raise DimensionError(f"cannot convolve fields on {f.grid} and {g.grid}")
    shape = f.grid.shape
    prod = sfft.rfftn(f.values) * sfft.rfftn(g.values)
    return GridField(f.grid, sfft.irfftn(prod, s=shape) * f.grid.cell_volume)


def spectrum(f: GridField) -> SpectrumField:
    """Discrete transform h^d·sum f(x) e^{-2πi x·ξ} at ξ = k/side, phase origin at index 0."""
    return SpectrumField(f.grid, sfft.fftn(f.values) * f.grid.cell_volume)


def inverse_spectrum(F: SpectrumField) -> GridField:
    return GridField(F.grid, np.real(sfft.ifftn(F.values)) / F.grid.cell_volume)


def save_field(path: Path, f: GridField) -> None:
    """
    Write a field as flat binary (.bin) or JSON (.json).

    The binary layout is the magic bytes RFGF, then <i4 dim, <f8 side, <i4 cells, then the
    values as little-endian doubles in C order.
    """
    suffix = path.suffix.lower()
    if suffix == ".json":
        payload = {"dim": f.dim, "side": f.side, "cells": f.cells, "values": f.values.tolist()}
        path.write_text(json.dumps(payload), encoding="utf-8")
        return
    if suffix != ".bin":
        raise ConfigurationError(f"unsupported field file suffix: {path.suffix!r} (use .bin or .json)")
    header = (
        _MAGIC
        + np.array([f.dim], dtype="<i4").tobytes()
        + np.array([f.side], dtype="<f8").tobytes()
        + np.array([f.cells], dtype="<i4").tobytes()
    )
    path.write_bytes(header + np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path: Path) -> GridField:
    suffix = path.suffix.lower()
    if suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        for key in ("dim", "side", "cells", "values"):
            if key not in data:
                raise ConfigurationError(f"field file {path} is missing key {key!r}")
        grid = Grid(int(data["dim"]), float(data["side"]), int(data["cells"]))
        return GridField(grid, np.asarray(data["values"], dtype=np.float64))
    if suffix != ".bin":
        raise ConfigurationError(f"unsupported field file suffix: {path.suffix!r} (use .bin or .json)")
    raw = path.read_bytes()
    if raw[:4] != _MAGIC:
        raise ConfigurationError(f"{path} is not a grid field file")
    if len(raw) < _HEADER_BYTES:
        raise ConfigurationError(f"{path} is truncated: {len(raw)} bytes, header needs {_HEADER_BYTES}")
    dim = int(np.frombuffer(raw, dtype="<i4", count=1, offset=4)[0])
    side = float(np.frombuffer(raw, dtype="<f8", count=1, offset=8)[0])
    cells = int(np.frombuffer(raw, dtype="<i4", count=1, offset=16)[0])
    grid = Grid(dim, side, cells)
    need = _HEADER_BYTES + 8 * grid.size
    if len(raw) < need:
        raise ConfigurationError(f"{path} is truncated: {len(raw)} bytes, a {grid} field needs {need}")
    values = np.frombuffer(raw, dtype="<f8", count=grid.size, offset=_HEADER_BYTES)
    return GridField(grid, values.reshape(grid.shape))
