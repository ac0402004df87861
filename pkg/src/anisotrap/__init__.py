"""Berry-phase dynamics of a two-level ion in an anisotropic 2D Paul trap."""

from anisotrap.errors import (
    AnisotrapError,
    ConfigError,
    ConvergenceError,
    HermiticityError,
    PhysicsError,
)

__version__ = "0.1.0"

__all__ = [
    "AnisotrapError",
    "ConfigError",
    "ConvergenceError",
    "HermiticityError",
    "PhysicsError",
    "__version__",
]
