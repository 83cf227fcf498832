"""Out-of-time-ordered correlator ``C(t) = -<[x(t), p]^2> / hbar(t)^2``.

The commutator ``K = [x(t), p]`` is ``i`` times a Hermitian operator, so
``-<K^2> = ||K psi||^2``. The Heisenberg operator ``x(t)`` is applied
matrix-free: forward-evolve to ``t``, multiply by ``x``, evolve back to 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError, ParameterError
from .model import DuffingParams, GaussianState, effective_hbar
from .quantum import Monitor, SplitOperator, WaveFunction, check_monitor, momentum_action


@dataclass
class OtocSeries:
    times: np.ndarray
    values: np.ndarray
    params: DuffingParams
    initial: GaussianState | None = None
    requested: int = 0
    stopped_by: str | None = None

    @property
    def log_values(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.values)

    @property
    def truncated(self) -> bool:
        return len(self.times) < self.requested


@dataclass(frozen=True)
class LyapunovFit:
    lambda_q: float
    window: tuple[float, float]
    r_squared: float
    samples: int = 0


@dataclass(frozen=True)
class ExponentialSegment:
    t_lo: float
    t_hi: float
    start: int
    stop: int

    @property
    def length(self) -> float:
        return self.t_hi - self.t_lo


def _step_index(t: float, dt: float) -> int:
    q = t / dt
    n = int(round(q))
    if n < 0 or abs(q - n) > 1e-6:
        raise ParameterError("sample_times", f"t={t!r} is not a whole number of steps dt={dt!r}")
    return n


def sample_schedule(params: DuffingParams, dt: float, cycles: float = 10.0, count: int = 80) -> np.ndarray:
    """``count`` times spread over ``[0, cycles T_cy]``, snapped to step boundaries."""
    if count < 1:
        raise ParameterError("count", "needs at least one sample")
    raw = np.linspace(0.0, cycles * params.period, count)
    steps = np.unique(np.rint(raw / dt).astype(int))
    return steps * dt


def _commutator_norm(amps, p_amps, op: SplitOperator, n_steps: int, params: DuffingParams):
    x = op.grid.x
    stack = np.stack([x * p_amps, x * amps])
    for j in range(n_steps - 1, -1, -1):
        stack = op.backward(stack, j * op.dt)
    b = stack[0] - momentum_action(stack[1], op.grid, params)
    return float(np.vdot(b, b).real * op.grid.dx)


def otoc_series(
    psi0: WaveFunction,
    sample_times: Sequence[float],
    dt: float,
    params: DuffingParams,
    monitor: Monitor | None = None,
    truncate: bool = False,
    initial: GaussianState | None = None,
) -> OtocSeries:
    """``C`` at each sample time.

    The pair ``(psi0, p psi0)`` is propagated forward once; each sample then
    runs its own backward pass. With ``truncate=True`` a grid-monitor failure
    on the forward pass ends the series at the last trusted sample instead of
    raising; ``stopped_by`` records the reason.
    """
    if psi0.t != 0.0:
        raise ValueError("psi0 must be given at t = 0")
    monitor = monitor or Monitor()
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise ParameterError("sample_times", "must be strictly increasing")
    steps = [_step_index(t, dt) for t in times]

    op = SplitOperator(psi0.grid, params, dt)
    amps = psi0.amplitudes / np.sqrt(psi0.norm())
    stack = np.stack([amps, momentum_action(amps, psi0.grid, params)])
    done, values, reason = 0, [], None
    for n in steps:
        try:
            while done < n:
                stack = op.forward(stack, done * dt)
                done += 1
                if done % monitor.stride == 0 or done == n:
                    check_monitor(WaveFunction(psi0.grid, stack[0], done * dt), monitor)
        except NumericalError as exc:
            if not truncate:
                raise
            reason = str(exc)
            break
        hbar_t = float(effective_hbar(n * dt, params))
        values.append(_commutator_norm(stack[0], stack[1], op, n, params) / hbar_t**2)
    kept = len(values)
    return OtocSeries(
        np.array([n * dt for n in steps[:kept]]), np.array(values), params, initial, len(steps), reason
    )


def otoc_at(psi0: WaveFunction, t: float, dt: float, params: DuffingParams, monitor: Monitor | None = None) -> float:
    return float(otoc_series(psi0, [t], dt, params, monitor).values[0])


def _line_fit(t: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def find_exponential_window(
    series: OtocSeries, points: int = 10, r2_min: float = 0.995
) -> ExponentialSegment | None:
    """Longest run of consecutive rolling ``points``-sample fits of ``ln C``
    with ``r^2 >= r2_min`` and positive slope (growth, not saturation)."""
    t, c = series.times, series.values
    n = len(t)
    if n < points:
        return None
    good = np.zeros(n - points + 1, dtype=bool)
    for i in range(n - points + 1):
        seg = c[i: i + points]
        if np.all(seg > 0):
            slope, r2 = _line_fit(t[i: i + points], np.log(seg))
            good[i] = slope > 0 and r2 >= r2_min
    best, start = None, None
    for i, g in enumerate(np.append(good, False)):
        if g and start is None:
            start = i
        elif not g and start is not None:
            stop = i - 1 + points  # exclusive sample index
            if best is None or t[stop - 1] - t[start] > best.length:
                best = ExponentialSegment(float(t[start]), float(t[stop - 1]), start, stop)
            start = None
    return best


def fit_quantum_lyapunov(series: OtocSeries, window: tuple[float, float] | None = None) -> LyapunovFit:
    """Least-squares line through ``(t, ln C)``; ``lambda_q`` is half the slope."""
    if window is None:
        seg = find_exponential_window(series)
        if seg is None:
            raise ValueError("no exponential window found; pass one explicitly")
        window = (seg.t_lo, seg.t_hi)
    lo, hi = window
    tol = 1e-9 * max(1.0, abs(hi))
    mask = (series.times >= lo - tol) & (series.times <= hi + tol)
    t, c = series.times[mask], series.values[mask]
    if len(t) < 10:
        raise ValueError(f"fit window holds {len(t)} samples; at least 10 required")
    if np.any(c <= 0):
        raise ValueError("fit window contains nonpositive C values")
    slope, r2 = _line_fit(t, np.log(c))
    return LyapunovFit(0.5 * slope, (float(lo), float(hi)), r2, len(t))
