"""Exception hierarchy. ``exit_code`` is what the CLI returns for each class."""


class AnisotrapError(Exception):
    exit_code = 1


class ConfigError(AnisotrapError, ValueError):
    exit_code = 2


class PhysicsError(AnisotrapError, ValueError):
    """A physical precondition does not hold (isotropic cycle, truncation, ...)."""

    exit_code = 3


class ConvergenceError(AnisotrapError, RuntimeError):
    exit_code = 4


class HermiticityError(AnisotrapError, ValueError):
    exit_code = 4
