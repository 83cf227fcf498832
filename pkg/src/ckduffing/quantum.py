"""Caldirola-Kanai wave-packet propagation on a periodic grid.

Each step of length ``dt`` is the V-T-V splitting

    exp(-i V dt / 2 hbar a) . exp(-i hbar a k^2 dt / 2m) . exp(-i V dt / 2 hbar a)

with every time-dependent coefficient frozen at the step midpoint. All
factors are diagonal phases (in x or in k), so the scheme is unitary and
its inverse is the conjugate factors applied with the same midpoints.

The canonical wavenumber of a packet with mechanical momentum ``P`` is
``P / (hbar a(t))``; under dissipation it grows like ``exp(delta t)``, which
is what the spectral-edge monitor guards against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import fft as sfft

from .errors import BoundaryMassError, ParameterError, ResolutionError
from .model import DuffingParams, GaussianState, damping_factor, potential, potential_force


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    m_points: int

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ParameterError("x_max", "must exceed x_min")
        m = self.m_points
        if m < 16 or m & (m - 1):
            raise ParameterError("m_points", f"must be a power of two >= 16, got {m}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.m_points

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.m_points) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Wavevectors in DFT order ``[0, 1, .., M/2-1, -M/2, .., -1] * 2 pi / (M dx)``."""
        m = self.m_points
        q = np.concatenate([np.arange(m // 2), np.arange(-m // 2, 0)])
        return (2.0 * np.pi / (m * self.dx)) * q

    @property
    def k_nyquist(self) -> float:
        return math.pi / self.dx


def make_grid(x_min: float, x_max: float, n_exponent: int) -> SpatialGrid:
    if int(n_exponent) != n_exponent or n_exponent < 4:
        raise ParameterError("n_exponent", "must be an integer >= 4")
    return SpatialGrid(float(x_min), float(x_max), 2 ** int(n_exponent))


@dataclass
class WaveFunction:
    grid: SpatialGrid
    amplitudes: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.grid.m_points,):
            raise ValueError("amplitudes must have one entry per grid node")

    def norm(self) -> float:
        """Probability ``sum |psi_j|^2 dx``."""
        a = self.amplitudes
        return float(np.vdot(a, a).real * self.grid.dx)

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes.copy(), self.t)


@dataclass(frozen=True)
class Observables:
    t: float
    norm: float
    mean_x: float
    mean_P: float
    energy: float
    mean_force: float = 0.0


@dataclass(frozen=True)
class Monitor:
    """Thresholds for the two failure modes of a finite periodic grid.

    ``boundary_threshold`` bounds the probability in the outer
    ``edge_fraction`` of nodes on each side; ``spectral_threshold`` bounds the
    fraction of momentum-space weight with ``|k| > (1 - spectral_fraction) k_max``.
    Checks run every ``stride`` steps and at the end.
    """

    boundary_threshold: float = 1e-8
    spectral_threshold: float = 1e-8
    edge_fraction: float = 0.05
    spectral_fraction: float = 0.1
    stride: int = 100


def boundary_mass(psi: WaveFunction, fraction: float = 0.05) -> float:
    amps = psi.amplitudes
    n = max(1, int(round(fraction * len(amps))))
    edge = np.vdot(amps[:n], amps[:n]).real + np.vdot(amps[-n:], amps[-n:]).real
    return float(edge * psi.grid.dx)


def spectral_edge_mass(psi: WaveFunction, fraction: float = 0.1) -> float:
    w = np.abs(sfft.fft(psi.amplitudes)) ** 2
    total = w.sum()
    if total == 0:
        return 0.0
    outer = np.abs(psi.grid.k) > (1.0 - fraction) * psi.grid.k_nyquist
    return float(w[outer].sum() / total)


def check_monitor(psi: WaveFunction, monitor: Monitor) -> tuple[float, float]:
    b = boundary_mass(psi, monitor.edge_fraction)
    if b > monitor.boundary_threshold:
        raise BoundaryMassError(psi.t, b, monitor.boundary_threshold)
    s = spectral_edge_mass(psi, monitor.spectral_fraction)
    if s > monitor.spectral_threshold:
        raise ResolutionError(psi.t, s, monitor.spectral_threshold)
    return b, s


def init_gaussian(grid: SpatialGrid, g: GaussianState, params: DuffingParams) -> WaveFunction:
    if g.x0 - 6 * g.sigma < grid.x_min or g.x0 + 6 * g.sigma > grid.x_max:
        raise ParameterError("x0", "packet must lie at least 6 sigma inside the domain")
    x = grid.x
    amps = (2 * math.pi * g.sigma**2) ** -0.25 * np.exp(
        -((x - g.x0) ** 2) / (4 * g.sigma**2) + 1j * g.p0 * (x - g.x0) / params.hbar
    )
    amps /= math.sqrt(np.vdot(amps, amps).real * grid.dx)
    return WaveFunction(grid, amps, 0.0)


class SplitOperator:
    """Precomputed pieces of the V-T-V step for one grid, parameter set and ``dt``.

    ``forward``/``backward`` act on the last axis, so a stack of states can
    be propagated together.
    """

    def __init__(self, grid: SpatialGrid, params: DuffingParams, dt: float):
        if not dt > 0:
            raise ParameterError("dt", "must be > 0")
        self.grid = grid
        self.params = params
        self.dt = float(dt)
        x = grid.x
        self._x = x
        self._v0 = 0.5 * params.alpha * x * x + 0.25 * params.beta * x**4
        self._k2 = grid.k**2
        self._pot = 0.5 * self.dt / params.hbar
        self._kin = 0.5 * params.hbar * self.dt / params.mass

    def potential_phase(self, t_mid: float, dt_fraction: float = 1.0) -> np.ndarray:
        a = math.exp(-self.params.delta * t_mid)
        drive = self.params.gamma * math.cos(self.params.omega * t_mid)
        return (self._pot * dt_fraction / a) * (self._v0 - drive * self._x)

    def kinetic_phase(self, t_mid: float) -> np.ndarray:
        a = math.exp(-self.params.delta * t_mid)
        return (self._kin * a) * self._k2

    def _factors(self, t_mid: float, sign: float):
        d = np.exp((-1j * sign) * self.potential_phase(t_mid))
        k = np.exp((-1j * sign) * self.kinetic_phase(t_mid))
        return d, k

    def forward(self, amps: np.ndarray, t: float) -> np.ndarray:
        """Step ``[t, t + dt]``."""
        d, k = self._factors(t + 0.5 * self.dt, 1.0)
        return d * sfft.ifft(k * sfft.fft(d * amps, axis=-1), axis=-1)

    def backward(self, amps: np.ndarray, t: float) -> np.ndarray:
        """Undo the step ``[t, t + dt]``: amplitudes at ``t + dt`` in, at ``t`` out."""
        d, k = self._factors(t + 0.5 * self.dt, -1.0)
        return d * sfft.ifft(k * sfft.fft(d * amps, axis=-1), axis=-1)


def potential_half_step(psi: WaveFunction, t_mid: float, dt: float, params: DuffingParams) -> WaveFunction:
    op = SplitOperator(psi.grid, params, dt)
    return replace(psi, amplitudes=np.exp(-1j * op.potential_phase(t_mid)) * psi.amplitudes)


def kinetic_full_step(psi: WaveFunction, t_mid: float, dt: float, params: DuffingParams) -> WaveFunction:
    op = SplitOperator(psi.grid, params, dt)
    kern = np.exp(-1j * op.kinetic_phase(t_mid))
    return replace(psi, amplitudes=sfft.ifft(kern * sfft.fft(psi.amplitudes)))


def step_vtv(psi: WaveFunction, dt: float, params: DuffingParams) -> WaveFunction:
    op = SplitOperator(psi.grid, params, dt)
    return WaveFunction(psi.grid, op.forward(psi.amplitudes, psi.t), psi.t + dt)


@dataclass
class Checkpoint:
    requested: float
    psi: WaveFunction

    @property
    def snap(self) -> float:
        """Distance between the requested time and the step boundary used."""
        return abs(self.psi.t - self.requested)


@dataclass
class Evolution:
    final: WaveFunction
    checkpoints: list[Checkpoint] = field(default_factory=list)
    observables: list[Observables] = field(default_factory=list)
    max_boundary_mass: float = 0.0
    max_spectral_mass: float = 0.0
    steps: int = 0


def _steps_between(t0: float, t1: float, dt: float) -> int:
    if not dt > 0:
        raise ParameterError("dt", "must be > 0")
    n = int(round((t1 - t0) / dt))
    if n < 0:
        raise ValueError("t_end must not precede psi.t")
    return n


def evolve(
    psi: WaveFunction,
    t_end: float,
    dt: float,
    params: DuffingParams,
    checkpoints: Sequence[float] = (),
    monitor: Monitor | None = None,
    observe_every: int | None = None,
) -> Evolution:
    """Propagate ``psi`` to ``t_end`` (rounded to a whole number of steps).

    Checkpoint times snap to the nearest step boundary; ``Checkpoint.snap``
    reports the distance. ``observe_every`` records :func:`observables` every
    that many steps (and at the final step).
    """
    monitor = monitor or Monitor()
    t0 = psi.t
    n = _steps_between(t0, t_end, dt)
    op = SplitOperator(psi.grid, params, dt)

    wanted: dict[int, list[float]] = {}
    for tc in checkpoints:
        j = min(max(int(round((tc - t0) / dt)), 0), n)
        wanted.setdefault(j, []).append(float(tc))

    result = Evolution(final=psi)
    amps = psi.amplitudes.copy()

    def state(j):
        return WaveFunction(psi.grid, amps, t0 + j * dt)

    def visit(j):
        cur = None
        if j in wanted:
            cur = state(j)
            for tc in wanted[j]:
                result.checkpoints.append(Checkpoint(tc, cur.copy()))
        if observe_every and (j % observe_every == 0 or j == n):
            cur = cur or state(j)
            result.observables.append(observables(cur, params))
        if j % monitor.stride == 0 or j == n:
            b, s = check_monitor(cur or state(j), monitor)
            result.max_boundary_mass = max(result.max_boundary_mass, b)
            result.max_spectral_mass = max(result.max_spectral_mass, s)

    visit(0)
    for j in range(n):
        amps = op.forward(amps, t0 + j * dt)
        visit(j + 1)
    result.final = WaveFunction(psi.grid, amps, t0 + n * dt)
    result.checkpoints.sort(key=lambda c: c.requested)
    result.steps = n
    return result


def evolve_backward(psi: WaveFunction, t_start: float, dt: float, params: DuffingParams) -> WaveFunction:
    """Exact inverse of :func:`evolve` from ``t_start`` with the same ``dt``."""
    q = (psi.t - t_start) / dt
    n = int(round(q))
    if n < 0 or abs(q - n) > 1e-6:
        raise ValueError(
            f"psi.t={psi.t!r} is not a whole number of steps dt={dt!r} after t_start={t_start!r}"
        )
    op = SplitOperator(psi.grid, params, dt)
    amps = psi.amplitudes
    for j in range(n - 1, -1, -1):
        amps = op.backward(amps, t_start + j * dt)
    return WaveFunction(psi.grid, amps, t_start)


def apply_position(psi: WaveFunction) -> WaveFunction:
    return replace(psi, amplitudes=psi.grid.x * psi.amplitudes)


def apply_canonical_momentum(psi: WaveFunction, params: DuffingParams) -> WaveFunction:
    """Spectral ``-i hbar d/dx``."""
    return replace(psi, amplitudes=momentum_action(psi.amplitudes, psi.grid, params))


def momentum_action(amps: np.ndarray, grid: SpatialGrid, params: DuffingParams) -> np.ndarray:
    return sfft.ifft((params.hbar * grid.k) * sfft.fft(amps, axis=-1), axis=-1)


def _moments(psi: WaveFunction, params: DuffingParams):
    rho = np.abs(psi.amplitudes) ** 2 * psi.grid.dx
    norm = rho.sum()
    w = np.abs(sfft.fft(psi.amplitudes)) ** 2
    w /= w.sum()
    k = psi.grid.k
    p1 = params.hbar * np.dot(k, w)
    p2 = params.hbar**2 * np.dot(k * k, w)
    return rho, norm, p1, p2


def observables(psi: WaveFunction, params: DuffingParams) -> Observables:
    rho, norm, p1, p2 = _moments(psi, params)
    x = psi.grid.x
    a = float(damping_factor(psi.t, params))
    mean_x = np.dot(x, rho) / norm
    mean_v = np.dot(potential(x, psi.t, params), rho) / norm
    mean_f = np.dot(potential_force(x, psi.t, params), rho) / norm
    energy = a * a * p2 / (2 * params.mass) + mean_v
    return Observables(psi.t, float(norm), float(mean_x), float(a * p1), float(energy), float(mean_f))


def ck_hamiltonian_expectation(psi: WaveFunction, params: DuffingParams) -> float:
    """``<a p^2 / 2m + V / a>``, the canonical Caldirola-Kanai Hamiltonian."""
    rho, norm, _, p2 = _moments(psi, params)
    a = float(damping_factor(psi.t, params))
    mean_v = np.dot(potential(psi.grid.x, psi.t, params), rho) / norm
    return float(a * p2 / (2 * params.mass) + mean_v / a)
