"""Exception hierarchy and the CLI exit codes attached to it."""

from __future__ import annotations


class ParameterError(ValueError):
    """A physical or numerical parameter is outside its domain.

    ``field`` names the offending attribute so config parsing can report a
    dotted key path.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigError(ValueError):
    exit_code = 1

    def __init__(self, message: str, *, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class NumericalError(RuntimeError):
    """The simulation left the regime where its output can be trusted."""

    exit_code = 2


class BoundaryMassError(NumericalError):
    def __init__(self, t: float, mass: float, threshold: float):
        super().__init__(
            f"boundary mass {mass:.3e} exceeds {threshold:.1e} at t={t:.6g}; enlarge the domain"
        )
        self.t = t
        self.mass = mass


class ResolutionError(NumericalError):
    def __init__(self, t: float, mass: float, threshold: float):
        super().__init__(
            f"spectral edge mass {mass:.3e} exceeds {threshold:.1e} at t={t:.6g}; "
            "increase grid.n_exponent or shrink the domain"
        )
        self.t = t
        self.mass = mass


class TrajectoryOverflowError(NumericalError):
    def __init__(self, index: int, t: float):
        super().__init__(f"trajectory {index} became non-finite at t={t:.6g}")
        self.index = index
        self.t = t


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3
