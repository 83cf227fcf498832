import math

import numpy as np
import pytest

from ckduffing.errors import NumericalError, ParameterError
from ckduffing.model import DuffingParams, GaussianState
from ckduffing.otoc import (
    OtocSeries,
    find_exponential_window,
    fit_quantum_lyapunov,
    otoc_at,
    otoc_series,
    sample_schedule,
)
from ckduffing.quantum import Monitor, init_gaussian, make_grid

from oracles import dense_otoc

HARMONIC = DuffingParams(alpha=1.0, beta=0.0, delta=0.0, gamma=0.0)
FREE = DuffingParams(alpha=0.0, beta=0.0, delta=0.0, gamma=0.0)
G0 = GaussianState()


@pytest.mark.parametrize("params", [DuffingParams(), DuffingParams(delta=0.0), HARMONIC])
def test_otoc_starts_at_one(params):
    psi = init_gaussian(make_grid(-8, 8, 10), G0, params)
    assert otoc_at(psi, 0.0, 0.01, params) == pytest.approx(1.0, abs=1e-8)


def test_harmonic_otoc_is_cos_squared():
    psi = init_gaussian(make_grid(-10, 10, 8), G0, HARMONIC)
    dt = 2 * math.pi / 800  # the splitting phase error grows like t dt^2
    t = np.arange(0, 1601, 40) * dt
    s = otoc_series(psi, t, dt, HARMONIC)
    assert np.abs(s.values - np.cos(t) ** 2).max() < 1e-4


def test_drive_does_not_change_harmonic_otoc():
    p = HARMONIC.replace(gamma=0.3)
    psi = init_gaussian(make_grid(-10, 10, 8), G0, p)
    dt = 2 * math.pi / 400
    t = np.arange(0, 401, 40) * dt
    assert np.abs(otoc_series(psi, t, dt, p).values - np.cos(t) ** 2).max() < 1e-4


def test_free_particle_otoc_is_constant():
    psi = init_gaussian(make_grid(-30, 30, 10), GaussianState(x0=0.0, p0=0.0), FREE)
    dt = 0.01
    t = np.arange(0, 301, 50) * dt
    assert np.abs(otoc_series(psi, t, dt, FREE).values - 1.0).max() < 1e-6


@pytest.mark.parametrize("params", [DuffingParams(), DuffingParams(delta=0.0)])
def test_matrix_free_matches_dense_operators(params):
    grid = make_grid(-6, 6, 6)
    psi = init_gaussian(grid, GaussianState(x0=0.5, p0=-0.5, sigma=0.6), params)
    dt = 0.02
    got = otoc_at(psi, 20 * dt, dt, params, Monitor(boundary_threshold=1.0, spectral_threshold=1.0))
    want = dense_otoc(psi, 20, dt, params)
    assert got == pytest.approx(want, rel=1e-8)


def test_sample_schedule_lands_on_steps():
    p = DuffingParams()
    dt = p.period / 400
    t = sample_schedule(p, dt, 10, 80)
    assert t[0] == 0.0 and t[-1] == pytest.approx(10 * p.period)
    np.testing.assert_allclose(t / dt, np.rint(t / dt), atol=1e-9)
    assert np.all(np.diff(t) > 0)


def test_rejects_misaligned_or_unordered_samples():
    psi = init_gaussian(make_grid(-8, 8, 8), G0, HARMONIC)
    with pytest.raises(ParameterError):
        otoc_series(psi, [0.0, 0.015], 0.01, HARMONIC)
    with pytest.raises(ParameterError):
        otoc_series(psi, [0.02, 0.01], 0.01, HARMONIC)


def test_monitor_failure_truncates_or_raises():
    p = DuffingParams()
    psi = init_gaussian(make_grid(-5, 5, 7), G0, p)
    dt = p.period / 100
    t = np.arange(0, 1001, 50) * dt
    with pytest.raises(NumericalError):
        otoc_series(psi, t, dt, p)
    s = otoc_series(psi, t, dt, p, truncate=True)
    assert s.truncated and s.stopped_by
    assert 0 < len(s.values) < len(t)
    assert s.values[0] == pytest.approx(1.0, abs=1e-8)


def synthetic(t, c):
    return OtocSeries(np.asarray(t, float), np.asarray(c, float), DuffingParams(), requested=len(t))


def test_fit_recovers_exponent():
    t = np.linspace(0, 10, 40)
    s = synthetic(t, 3.0 * np.exp(2 * 0.37 * t))
    fit = fit_quantum_lyapunov(s)
    assert fit.lambda_q == pytest.approx(0.37, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.window == (0.0, 10.0)


def test_window_stops_at_saturation():
    t = np.linspace(0, 20, 81)
    logc = np.where(t < 8, 0.6 * t, 4.8)
    seg = find_exponential_window(synthetic(t, np.exp(logc)))
    assert seg.t_lo == 0.0
    assert 7.0 <= seg.t_hi <= 9.0
    fit = fit_quantum_lyapunov(synthetic(t, np.exp(logc)))
    assert fit.lambda_q == pytest.approx(0.3, rel=0.05)


def test_constant_series_has_no_growth_window():
    t = np.linspace(0, 5, 20)
    s = synthetic(t, np.ones_like(t))
    assert find_exponential_window(s) is None
    with pytest.raises(ValueError):
        fit_quantum_lyapunov(s)
    fit = fit_quantum_lyapunov(s, window=(0.0, 5.0))
    assert fit.lambda_q == pytest.approx(0.0, abs=1e-12)


def test_fit_rejects_bad_windows():
    t = np.linspace(0, 5, 20)
    c = np.exp(t)
    c[3] = 0.0
    with pytest.raises(ValueError):
        fit_quantum_lyapunov(synthetic(t, c), window=(0.0, 5.0))
    with pytest.raises(ValueError):
        fit_quantum_lyapunov(synthetic(t, np.exp(t)), window=(0.0, 1.0))
