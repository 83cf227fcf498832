"""Parameters and the Duffing potential shared by the classical and quantum code.

The damping schedule is ``a(t) = exp(-delta t)``. The potential returned here
is the bare mechanical one; the Caldirola-Kanai ``1/a`` scaling is applied by
the propagator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class DuffingParams:
    """Constants of ``m x'' + m delta x' + alpha x + beta x^3 = gamma cos(omega t)``."""

    alpha: float = -1.0
    beta: float = 0.25
    delta: float = 0.1
    gamma: float = 2.5
    omega: float = 2.0
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ParameterError(name, f"must be finite, got {value!r}")
        if self.omega <= 0:
            raise ParameterError("omega", "must be > 0")
        if self.mass <= 0:
            raise ParameterError("mass", "must be > 0")
        if self.hbar <= 0:
            raise ParameterError("hbar", "must be > 0")
        if self.delta < 0:
            raise ParameterError("delta", "must be >= 0")
        if self.gamma < 0:
            raise ParameterError("gamma", "must be >= 0")

    @property
    def period(self) -> float:
        """Drive period ``T_cy = 2 pi / omega``."""
        return 2.0 * math.pi / self.omega

    def replace(self, **changes) -> "DuffingParams":
        return DuffingParams(**{**asdict(self), **changes})


@dataclass(frozen=True)
class GaussianState:
    """Minimum-uncertainty packet centred at ``(x0, p0)`` with position width ``sigma``."""

    x0: float = 1.0
    p0: float = -1.5
    sigma: float = 0.5

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ParameterError("sigma", "must be > 0")
        if not (math.isfinite(self.x0) and math.isfinite(self.p0)):
            raise ParameterError("x0", "centre must be finite")


def damping_factor(t, params: DuffingParams):
    return np.exp(-params.delta * np.asarray(t, dtype=float))[()]


def effective_hbar(t, params: DuffingParams):
    return params.hbar * damping_factor(t, params)


def potential(x, t: float, params: DuffingParams):
    """``alpha x^2/2 + beta x^4/4 - gamma x cos(omega t)``."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    drive = params.gamma * math.cos(params.omega * t)
    return (0.5 * params.alpha * x2 + 0.25 * params.beta * x2 * x2 - drive * x)[()]


def potential_force(x, t: float, params: DuffingParams):
    """Gradient ``dV/dx`` (the force is its negative)."""
    x = np.asarray(x, dtype=float)
    drive = params.gamma * math.cos(params.omega * t)
    return (params.alpha * x + params.beta * x * x * x - drive)[()]


def potential_curvature(x, params: DuffingParams):
    x = np.asarray(x, dtype=float)
    return (params.alpha + 3.0 * params.beta * x * x)[()]
