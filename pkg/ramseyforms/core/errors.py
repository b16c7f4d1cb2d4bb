from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid grid, spec or experiment configuration."""


class WraparoundError(ConfigurationError):
    """A configuration scale exceeds R/4, so torus images would be counted."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class DimensionError(ValueError):
    """Fields or kernels with mismatched geometry."""


class DegenerateConfigurationError(ValueError):
    """Linearly dependent directions or constraints, or a malformed tree."""


class QuadratureError(RuntimeError):
    """Quadrature disagrees with its node-doubled refinement."""
