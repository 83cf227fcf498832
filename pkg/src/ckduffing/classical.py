"""Classical dissipative Duffing flow: ensembles, stroboscopic snapshots,
tangent-space Lyapunov exponents and the harmonic closed forms.

The phase-space ordinate everywhere is the mechanical momentum ``P = m v``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ParameterError, TrajectoryOverflowError
from .model import DuffingParams, GaussianState

log = logging.getLogger(__name__)

RESCALE_THRESHOLD = 1e100


class ClassicalState(NamedTuple):
    """Position and velocity; fields may be floats or equally shaped arrays."""

    x: float
    v: float


class TangentState(NamedTuple):
    B: float
    Bdot: float
    log_scale: float = 0.0

    @property
    def log_norm(self) -> float:
        """``log |(B, B')|`` including every rescaling applied so far."""
        return math.log(math.hypot(self.B, self.Bdot)) + self.log_scale


@dataclass
class ClassicalEnsemble:
    x: np.ndarray
    v: np.ndarray
    t: float = 0.0
    seed: int = 0

    def __len__(self) -> int:
        return len(self.x)

    @property
    def states(self) -> list[ClassicalState]:
        return [ClassicalState(float(a), float(b)) for a, b in zip(self.x, self.v)]

    def points(self, params: DuffingParams) -> np.ndarray:
        """``(n, 2)`` array of ``(x, P)`` with ``P = m v``."""
        return np.column_stack([self.x, params.mass * self.v])


@dataclass(frozen=True)
class ResponseBranch:
    omega: float
    amplitude: float
    stable: bool


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    first_half: float
    second_half: float
    converged: bool
    t_measure: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class StrobeSpec:
    """When to record snapshots, in units of the drive period.

    Either explicit ``cycles`` (e.g. ``(13.37,)``) or ``count`` periodic
    sections at ``(start + n + phase) T_cy`` for ``n = 0..count-1``.
    """

    cycles: tuple[float, ...] = ()
    count: int = 0
    phase: float = 0.0
    start: int = 0

    @classmethod
    def snapshot(cls, *cycles: float) -> "StrobeSpec":
        return cls(cycles=tuple(float(c) for c in cycles))

    @classmethod
    def periodic(cls, count: int, phase: float = 0.0, start: int = 0) -> "StrobeSpec":
        return cls(count=int(count), phase=float(phase), start=int(start))

    def times(self, params: DuffingParams) -> np.ndarray:
        T = params.period
        if self.count:
            n = np.arange(self.count) + self.start
            return (n + self.phase) * T
        return np.array(self.cycles, dtype=float) * T


def duffing_derivative(s: ClassicalState, t: float, params: DuffingParams) -> tuple:
    x, v = s
    drive = params.gamma * math.cos(params.omega * t)
    force = -params.alpha * x - params.beta * x * x * x + drive
    return v, -params.delta * v + force / params.mass


def rk4_step(s: ClassicalState, t: float, dt: float, params: DuffingParams) -> ClassicalState:
    h = 0.5 * dt
    k1x, k1v = duffing_derivative(s, t, params)
    k2x, k2v = duffing_derivative((s.x + h * k1x, s.v + h * k1v), t + h, params)
    k3x, k3v = duffing_derivative((s.x + h * k2x, s.v + h * k2v), t + h, params)
    k4x, k4v = duffing_derivative((s.x + dt * k3x, s.v + dt * k3v), t + dt, params)
    c = dt / 6.0
    return ClassicalState(
        s.x + c * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        s.v + c * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )


def sample_ensemble(g: GaussianState, n: int, seed: int, params: DuffingParams) -> ClassicalEnsemble:
    """Draw ``n`` initial conditions distributed like the packet's Husimi density.

    ``Var(x) = 2 sigma^2`` and ``Var(P) = hbar^2 / (2 sigma^2)``.
    """
    if n < 1:
        raise ValueError("ensemble size must be >= 1")
    rng = np.random.default_rng(seed)
    std_x = math.sqrt(2.0) * g.sigma
    std_P = params.hbar / (math.sqrt(2.0) * g.sigma)
    x = rng.normal(g.x0, std_x, size=n)
    P = rng.normal(g.p0, std_P, size=n)
    return ClassicalEnsemble(x=x, v=P / params.mass, t=0.0, seed=seed)


def _check_finite(x, v, t, on_overflow):
    bad = ~(np.isfinite(x) & np.isfinite(v))
    if not bad.any():
        return
    if on_overflow == "raise":
        raise TrajectoryOverflowError(int(np.flatnonzero(bad)[0]), t)
    fresh = np.flatnonzero(bad & ~np.isnan(x))
    if fresh.size:
        log.warning("excluding %d non-finite trajectories at t=%.6g (first index %d)",
                    fresh.size, t, fresh[0])
    x[bad] = np.nan
    v[bad] = np.nan


def evolve_ensemble(
    e: ClassicalEnsemble,
    t_end: float,
    dt: float,
    strobe: StrobeSpec,
    params: DuffingParams,
    on_overflow: str = "raise",
    check_every: int = 100,
) -> list[tuple[float, np.ndarray]]:
    """Integrate every member with RK4 and return ``(t, points)`` snapshots.

    Strobe times that fall between steps are reached with one shortened step.
    With ``on_overflow="exclude"`` diverging members become NaN rows instead
    of aborting the run, so row ``i`` always belongs to trajectory ``i``.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if on_overflow not in ("raise", "exclude"):
        raise ValueError("on_overflow must be 'raise' or 'exclude'")
    times = np.sort(strobe.times(params))
    if times.size and (times[0] < e.t - 1e-12 or times[-1] > t_end + 1e-12):
        raise ValueError("strobe times must lie within [e.t, t_end]")

    with np.errstate(over="ignore", invalid="ignore"):
        x = np.array(e.x, dtype=float)
        v = np.array(e.v, dtype=float)
        t = float(e.t)
        out: list[tuple[float, np.ndarray]] = []
        for target in list(times) + [t_end]:
            t0 = t
            n_full = int(math.floor((target - t0) / dt + 1e-9))
            for i in range(n_full):
                x, v = rk4_step(ClassicalState(x, v), t0 + i * dt, dt, params)
                if (i + 1) % check_every == 0:
                    _check_finite(x, v, t0 + (i + 1) * dt, on_overflow)
            t = t0 + n_full * dt
            rest = target - t
            if rest > 1e-12 * dt:
                x, v = rk4_step(ClassicalState(x, v), t, rest, params)
            t = float(target)
            _check_finite(x, v, t, on_overflow)
            out.append((t, np.column_stack([x, params.mass * v])))
    return out[:-1]


def _tangent_rk4(x, v, B, Bd, t, dt, p: DuffingParams):
    # Base trajectory and B'' + delta B' + V''(x) B / m = 0, stage-synchronous.
    a, b, d, g, w, m = p.alpha, p.beta, p.delta, p.gamma, p.omega, p.mass
    h = 0.5 * dt
    c0 = g * math.cos(w * t)
    ch = g * math.cos(w * (t + h))
    c1 = g * math.cos(w * (t + dt))

    k1x = v
    k1v = -d * v + (-a * x - b * x * x * x + c0) / m
    k1B = Bd
    k1D = -d * Bd - (a + 3.0 * b * x * x) * B / m

    x2 = x + h * k1x
    v2 = v + h * k1v
    B2 = B + h * k1B
    D2 = Bd + h * k1D
    k2x = v2
    k2v = -d * v2 + (-a * x2 - b * x2 * x2 * x2 + ch) / m
    k2B = D2
    k2D = -d * D2 - (a + 3.0 * b * x2 * x2) * B2 / m

    x3 = x + h * k2x
    v3 = v + h * k2v
    B3 = B + h * k2B
    D3 = Bd + h * k2D
    k3x = v3
    k3v = -d * v3 + (-a * x3 - b * x3 * x3 * x3 + ch) / m
    k3B = D3
    k3D = -d * D3 - (a + 3.0 * b * x3 * x3) * B3 / m

    x4 = x + dt * k3x
    v4 = v + dt * k3v
    B4 = B + dt * k3B
    D4 = Bd + dt * k3D
    k4x = v4
    k4v = -d * v4 + (-a * x4 - b * x4 * x4 * x4 + c1) / m
    k4B = D4
    k4D = -d * D4 - (a + 3.0 * b * x4 * x4) * B4 / m

    c = dt / 6.0
    return (
        x + c * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        v + c * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        B + c * (k1B + 2.0 * k2B + 2.0 * k3B + k4B),
        Bd + c * (k1D + 2.0 * k2D + 2.0 * k3D + k4D),
    )


def tangent_step(
    s: ClassicalState, ts: TangentState, t: float, dt: float, params: DuffingParams
) -> tuple[ClassicalState, TangentState]:
    """Advance the base trajectory and the Poisson bracket ``B = {x(t), p(0)}`` together."""
    x, v, B, Bd = _tangent_rk4(s.x, s.v, ts.B, ts.Bdot, t, dt, params)
    log_scale = ts.log_scale
    norm = math.hypot(B, Bd)
    if norm > RESCALE_THRESHOLD:
        B /= norm
        Bd /= norm
        log_scale += math.log(norm)
    return ClassicalState(x, v), TangentState(B, Bd, log_scale)


def _start_state(start, params: DuffingParams) -> ClassicalState:
    if isinstance(start, GaussianState):
        return ClassicalState(start.x0, start.p0 / params.mass)
    x, v = start
    return ClassicalState(float(x), float(v))


def lyapunov_exponent(
    start,
    t_transient: float,
    t_measure: float,
    dt: float,
    params: DuffingParams,
    tolerance: float = 0.03,
) -> LyapunovEstimate:
    """Largest Lyapunov exponent from the linearised stability equation.

    After ``t_transient`` the tangent vector is reset to ``(B, B') = (1, 0)``
    and its log growth is averaged over ``t_measure``. The growth is read
    from the norm of ``(B, B')`` so that a zero crossing of ``B`` at the final
    instant does not bias the estimate. ``converged`` is false when the two
    half-window estimates differ by more than ``tolerance``.
    """
    if t_measure <= 0 or dt <= 0:
        raise ValueError("t_measure and dt must be > 0")
    s = _start_state(start, params)
    n_tr = int(round(t_transient / dt))
    n_half = int(round(0.5 * t_measure / dt))
    x, v = s
    for i in range(n_tr):
        x, v = rk4_step(ClassicalState(x, v), i * dt, dt, params)

    B, Bd, log_scale = 1.0, 0.0, 0.0
    t0 = n_tr * dt
    growth = []
    for half in range(2):
        base = n_tr + half * n_half
        for i in range(n_half):
            x, v, B, Bd = _tangent_rk4(x, v, B, Bd, (base + i) * dt, dt, params)
            if not (abs(B) < RESCALE_THRESHOLD and abs(Bd) < RESCALE_THRESHOLD):
                norm = math.hypot(B, Bd)
                if not math.isfinite(norm):
                    raise TrajectoryOverflowError(0, (base + i + 1) * dt)
                B /= norm
                Bd /= norm
                log_scale += math.log(norm)
        growth.append(math.log(math.hypot(B, Bd)) + log_scale)
    t_half = n_half * dt
    first = growth[0] / t_half
    second = (growth[1] - growth[0]) / t_half
    total = growth[1] / (2 * t_half)
    converged = abs(first - second) <= tolerance
    if not converged:
        log.warning("Lyapunov estimate not converged: halves %.4f vs %.4f (t0=%.3g)", first, second, t0)
    return LyapunovEstimate(total, first, second, converged, 2 * t_half)


def harmonic_steady_state(params: DuffingParams) -> tuple[float, float]:
    """Amplitude and phase lag of ``x_p = A cos(omega t - phi)`` for the linear oscillator.

    ``phi`` is in ``[0, pi)``; the drive leads the displacement.
    """
    if params.beta != 0:
        raise ParameterError("beta", "steady-state closed form needs beta = 0")
    if params.alpha <= 0:
        raise ParameterError("alpha", "steady-state closed form needs alpha > 0")
    w0sq = params.alpha / params.mass
    f = params.gamma / params.mass
    w = params.omega
    A = f / math.hypot(w0sq - w * w, params.delta * w)
    phi = math.atan2(params.delta * w, w0sq - w * w)
    return A, phi


def harmonic_trajectory(t, x0: float, v0: float, params: DuffingParams):
    """Exact ``(x(t), v(t))`` of the damped driven linear oscillator (transient + steady state)."""
    A, phi = harmonic_steady_state(params)
    t = np.asarray(t, dtype=float)
    w = params.omega
    xp = A * np.cos(w * t - phi)
    vp = -A * w * np.sin(w * t - phi)
    c1 = x0 - A * math.cos(phi)
    dv = v0 - A * w * math.sin(phi)
    half = 0.5 * params.delta
    disc = half * half - params.alpha / params.mass
    if disc < 0:
        wd = math.sqrt(-disc)
        c2 = (dv + half * c1) / wd
        env = np.exp(-half * t)
        cos, sin = np.cos(wd * t), np.sin(wd * t)
        xh = env * (c1 * cos + c2 * sin)
        vh = env * ((-half * c1 + wd * c2) * cos + (-half * c2 - wd * c1) * sin)
    elif disc > 0:
        r1, r2 = -half + math.sqrt(disc), -half - math.sqrt(disc)
        a2 = (dv - r1 * c1) / (r2 - r1)
        a1 = c1 - a2
        xh = a1 * np.exp(r1 * t) + a2 * np.exp(r2 * t)
        vh = a1 * r1 * np.exp(r1 * t) + a2 * r2 * np.exp(r2 * t)
    else:
        r = -half
        b = dv - r * c1
        xh = (c1 + b * t) * np.exp(r * t)
        vh = (b + r * (c1 + b * t)) * np.exp(r * t)
    return (xh + xp)[()], (vh + vp)[()]


def response_residual(A: float, omega: float, params: DuffingParams, damping: str = "linear") -> float:
    """``[(alpha + 3/4 beta A^2 - omega^2)^2 + D^2] A^2 - gamma^2`` in per-unit-mass form."""
    kappa = params.alpha / params.mass - omega * omega
    c = 0.75 * params.beta / params.mass
    D = _damping_term(omega, params, damping)
    g = params.gamma / params.mass
    return ((kappa + c * A * A) ** 2 + D * D) * A * A - g * g


def _damping_term(omega: float, params: DuffingParams, damping: str) -> float:
    if damping == "linear":
        return params.delta * omega
    if damping == "literal":
        return 2.0 * params.delta * omega
    raise ValueError("damping must be 'linear' or 'literal'")


def _amplitude_roots(omega: float, params: DuffingParams, damping: str) -> list[float]:
    kappa = params.alpha / params.mass - omega * omega
    c = 0.75 * params.beta / params.mass
    D = _damping_term(omega, params, damping)
    g2 = (params.gamma / params.mass) ** 2
    lin = kappa * kappa + D * D

    if g2 == 0:
        # Only (kappa + c u)^2 + D^2 = 0 gives a nontrivial branch.
        if c != 0 and D == 0 and -kappa / c > 0:
            return [math.sqrt(-kappa / c)]
        return []
    if c == 0:
        return [math.sqrt(g2 / lin)] if lin > 0 else []

    # f(u) = c^2 u^3 + 2 kappa c u^2 + (kappa^2 + D^2) u - g^2, f(0) < 0.
    coeffs = (c * c, 2.0 * kappa * c, lin, -g2)

    def f(u):
        return ((coeffs[0] * u + coeffs[1]) * u + coeffs[2]) * u + coeffs[3]

    def fp(u):
        return (3.0 * coeffs[0] * u + 2.0 * coeffs[1]) * u + coeffs[2]

    # Monotone pieces are delimited by the real critical points of f.
    qa, qb, qc = 3.0 * coeffs[0], 2.0 * coeffs[1], coeffs[2]
    disc = qb * qb - 4.0 * qa * qc
    crit = []
    if disc > 0:
        r = math.sqrt(disc)
        crit = sorted(u for u in ((-qb - r) / (2 * qa), (-qb + r) / (2 * qa)) if u > 0)
    upper = 1.0 + max(abs(coeffs[i] / coeffs[0]) for i in (1, 2, 3))
    edges = [0.0, *crit, upper]
    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        flo, fhi = f(lo), f(hi)
        if flo == 0.0 and lo > 0:
            roots.append(lo)
        elif flo * fhi < 0:
            u = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
            for _ in range(3):
                d = fp(u)
                if d == 0:
                    break
                u_new = u - f(u) / d
                if not (lo <= u_new <= hi):
                    break
                u = u_new
            roots.append(u)
    return [math.sqrt(u) for u in sorted(set(roots)) if u > 0]


def frequency_response(
    params: DuffingParams, omega_grid: Sequence[float], damping: str = "linear"
) -> list[ResponseBranch]:
    """Harmonic-balance amplitudes for every drive frequency.

    ``damping="linear"`` uses ``(delta omega)^2`` so that ``beta -> 0``
    reproduces the linear amplitude formula; ``"literal"`` uses
    ``(2 delta omega)^2``. Where three amplitudes coexist the middle one is
    the unstable branch.
    """
    omega_grid = list(omega_grid)
    if not omega_grid:
        raise ValueError("omega_grid must be nonempty")
    branches = []
    for w in omega_grid:
        if w <= 0:
            raise ParameterError("omega", "frequencies must be > 0")
        amps = _amplitude_roots(float(w), params, damping)
        for i, A in enumerate(amps):
            stable = not (len(amps) == 3 and i == 1)
            branches.append(ResponseBranch(float(w), A, stable))
    return branches
