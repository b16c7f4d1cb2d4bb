from __future__ import annotations

import hashlib
import json
import logging
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ramseyforms.core.counting import BoxSpec, SimplexSpec, TreeSpec, check_wraparound
from ramseyforms.core.errors import ConfigurationError
from ramseyforms.core.grid import Grid, GridField
from ramseyforms.core.kernels import AnisotropyParams
from ramseyforms.core.multiscale import ScaleLadder
from ramseyforms.core.sets import SET_KINDS, build_set

logger = logging.getLogger(__name__)

COMMANDS = ("verify", "count", "sweep", "decompose")
CONFIG_KINDS = ("box", "tree", "simplex")
REQUIRED_KEYS = ("side", "cells")
# execution settings that never change a result; kept out of report headers and digests
RUNTIME_KEYS = ("workers",)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: the grid, the set, the configuration spec and the scales to run."""

    side: float
    cells: int
    command: str = "count"
    set: str = "full"
    set_density: float = 0.5
    set_seed: int = 0
    set_period: float | None = None
    set_radius: float | None = None
    set_width: float | None = None
    set_axis: int = 0
    set_path: str | None = None
    config: str = "box"
    n: int | None = None
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()
    directions: tuple[tuple[float, ...], ...] = ()
    edges: tuple[tuple[int, int], ...] = ()
    root: int = 0
    plane_dims: tuple[int, ...] = ()
    lambdas: tuple[float, ...] = ()
    ladder_start: float | None = None
    ladder_ratio: float = 2.0
    ladder_count: int | None = None
    eps: tuple[float, ...] = (0.5,)
    samples: int = 1000
    seed: int = 0
    workers: int = 1
    suites: tuple[str, ...] = ()
    trials: int = 1000
    shell_width: float = 1.0
    coverage: float = 0.999
    refine: bool = True
    refine_cells: tuple[int, ...] = ()
    oracle: bool = False
    timings: bool = False
    raw: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def params(self) -> AnisotropyParams:
        n = self.n or len(self.a) or len(self.edges) or len(self.directions) or 1
        a = self.a or (1.0,) * n
        b = self.b or (1.0,) * len(a)
        if len(a) != n:
            raise ConfigurationError(f"n = {n} but {len(a)} exponents were given in 'a'")
        return AnisotropyParams(a, b)

    def spec(self) -> BoxSpec | TreeSpec | SimplexSpec:
        params = self.params
        if self.config == "box":
            return BoxSpec(params, self.plane_dims)
        if self.config == "tree":
            if self.edges:
                return TreeSpec(len(self.edges) + 1, self.edges, params, self.root)
            return TreeSpec.path(params, self.root)
        if not self.directions:
            raise ConfigurationError("missing required key 'directions' for config = 'simplex'")
        return SimplexSpec(self.directions, params)

    @property
    def dim(self) -> int:
        spec = self.spec()
        if isinstance(spec, BoxSpec):
            return spec.grid_dim
        if isinstance(spec, SimplexSpec):
            return spec.ambient_dim
        return 2

    def grid(self) -> Grid:
        return Grid(self.dim, self.side, self.cells)

    def build_field(self) -> GridField:
        options = {
            "density": self.set_density,
            "seed": self.set_seed,
            "period": self.set_period,
            "radius": self.set_radius,
            "width": self.set_width,
            "axis": self.set_axis,
            "path": self.set_path,
        }
        return build_set(self.grid(), self.set, options)

    def ladder(self) -> ScaleLadder | None:
        if self.ladder_start is None:
            return None
        count = self.ladder_count or 1
        return ScaleLadder.geometric(self.ladder_start, self.ladder_ratio, count, min(self.eps), self.params.a[-1])

    def scales(self) -> tuple[float, ...]:
        """The λ values a run touches: the explicit grid, else the ladder."""
        if self.lambdas:
            return self.lambdas
        ladder = self.ladder()
        return ladder.scales if ladder is not None else ()

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(_results_only(self.raw)).encode("utf-8")).hexdigest()[:16]


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _results_only(raw: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in raw.items() if k not in RUNTIME_KEYS}


def _as_tuple(raw: Any, key: str, cast: type) -> tuple[Any, ...]:
    items = raw if isinstance(raw, (list, tuple)) else [raw]
    try:
        return tuple(cast(x) for x in items)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"key {key!r} must be a list of {cast.__name__} values: {e}") from None


def _scalar(raw: dict[str, Any], key: str, cast: type) -> Any:
    try:
        return cast(raw[key])
    except (TypeError, ValueError):
        raise ConfigurationError(f"key {key!r} must be {cast.__name__}, got {raw[key]!r}") from None


_FLOATS = ("side", "set_density", "set_period", "set_radius", "set_width", "ladder_start", "ladder_ratio", "shell_width", "coverage")
_INTS = ("cells", "set_seed", "set_axis", "n", "root", "ladder_count", "samples", "seed", "workers", "trials")
_BOOLS = ("refine", "oracle", "timings")
_STRS = ("command", "set", "set_path", "config")


def parse_config(raw: dict[str, Any]) -> ExperimentConfig:
    """
    Validate a raw mapping into an ExperimentConfig.

    Every referenced parameter is checked against the module preconditions here, wraparound
    included, so that invalid runs fail before any compute.

    :raises ConfigurationError: missing or malformed keys, inadmissible parameters
    """
    if not isinstance(raw, dict):
        raise ConfigurationError("a config must be a mapping of keys to values")
    known = {f for f in ExperimentConfig.__dataclass_fields__ if f != "raw"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown config key(s): {', '.join(unknown)}")
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ConfigurationError(f"missing required key {key!r}")

    kw: dict[str, Any] = {}
    for key in _FLOATS:
        if raw.get(key) is not None:
            kw[key] = _scalar(raw, key, float)
    for key in _INTS:
        if raw.get(key) is not None:
            kw[key] = _scalar(raw, key, int)
    for key in _BOOLS:
        if key in raw:
            if not isinstance(raw[key], bool):
                raise ConfigurationError(f"key {key!r} must be true or false")
            kw[key] = raw[key]
    for key in _STRS:
        if raw.get(key) is not None:
            kw[key] = str(raw[key])
    for key in ("a", "b", "lambdas", "eps"):
        if key in raw:
            kw[key] = _as_tuple(raw[key], key, float)
    if "plane_dims" in raw:
        kw["plane_dims"] = _as_tuple(raw["plane_dims"], "plane_dims", int)
    if "refine_cells" in raw:
        kw["refine_cells"] = _as_tuple(raw["refine_cells"], "refine_cells", int)
    if "suites" in raw:
        kw["suites"] = _as_tuple(raw["suites"], "suites", str)
    if "directions" in raw:
        kw["directions"] = tuple(_as_tuple(row, "directions", float) for row in raw["directions"])
    if "edges" in raw:
        edges = tuple(_as_tuple(e, "edges", int) for e in raw["edges"])
        if any(len(e) != 2 for e in edges):
            raise ConfigurationError("every entry of 'edges' must be a pair of vertices")
        kw["edges"] = edges

    cfg = ExperimentConfig(raw=dict(raw), **kw)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigurationError(f"unknown command {cfg.command!r}; expected one of {', '.join(COMMANDS)}")
    if cfg.config not in CONFIG_KINDS:
        raise ConfigurationError(f"unknown config {cfg.config!r}; expected one of {', '.join(CONFIG_KINDS)}")
    if cfg.set not in SET_KINDS:
        raise ConfigurationError(f"unknown set {cfg.set!r}; expected one of {', '.join(SET_KINDS)}")
    for key, needed in (("ball-lattice", ("set_period", "set_radius")), ("strips", ("set_width", "set_period")), ("file", ("set_path",))):
        if cfg.set == key:
            for name in needed:
                if getattr(cfg, name) is None:
                    raise ConfigurationError(f"missing required key {name!r} for set = {key!r}")
    if cfg.samples < 1 or cfg.workers < 1 or cfg.trials < 1:
        raise ConfigurationError("samples, workers and trials must be positive")
    if not 0.0 < cfg.coverage <= 1.0:
        raise ConfigurationError(f"coverage must lie in (0, 1], got {cfg.coverage!r}")
    for e in cfg.eps:
        if not 0.0 <= e <= 1.0:
            raise ConfigurationError(f"every ε must lie in [0, 1], got {e!r}")
    for n in cfg.refine_cells:
        if n <= cfg.cells or n % cfg.cells or (n // cfg.cells) & (n // cfg.cells - 1):
            raise ConfigurationError(f"every refine_cells entry must be cells·2^k with k ≥ 1, got {n!r}")

    # side and cells are checked even when no suite needs the configured grid
    Grid(1, cfg.side, cfg.cells)
    if cfg.command == "verify":
        return
    grid = cfg.grid()
    if cfg.command == "decompose":
        if cfg.ladder_start is None and not cfg.lambdas:
            raise ConfigurationError("missing required key 'ladder_start' (or 'lambdas') for decompose")
        if cfg.ladder_start is not None:
            cfg.ladder()
    elif not cfg.scales():
        raise ConfigurationError(f"missing required key 'lambdas' for {cfg.command}")
    params = cfg.params
    for lam in cfg.scales():
        if not lam > 0:
            raise ConfigurationError(f"λ must be positive, got {lam!r}")
        check_wraparound(grid, params.scales(lam))
    logger.info("config ok: %s on %s, %d scale(s)", cfg.config, grid, len(cfg.scales()))


def load_config(path: Path) -> ExperimentConfig:
    """Read a .toml or .json config file."""
    suffix = path.suffix.lower()
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    if suffix == ".toml":
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"{path}: {e}") from None
    elif suffix == ".json":
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: {e}") from None
    else:
        raise ConfigurationError(f"unsupported config suffix {path.suffix!r} (use .toml or .json)")
    return parse_config(raw)


def with_overrides(cfg: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Re-parse with CLI overrides applied; None values are ignored."""
    raw = dict(cfg.raw)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return parse_config(raw)


def echo(cfg: ExperimentConfig) -> dict[str, Any]:
    """The config as written, minus the runtime keys, for report headers."""
    return json.loads(canonical_json(_results_only(cfg.raw)))
