import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.spatial import ConvexHull

from ckduffing.classical import (
    ClassicalEnsemble,
    ClassicalState,
    StrobeSpec,
    TangentState,
    duffing_derivative,
    evolve_ensemble,
    frequency_response,
    harmonic_steady_state,
    harmonic_trajectory,
    lyapunov_exponent,
    response_residual,
    rk4_step,
    sample_ensemble,
    tangent_step,
)
from ckduffing.errors import ParameterError, TrajectoryOverflowError
from ckduffing.model import DuffingParams, GaussianState

HARMONIC = DuffingParams(alpha=1.0, beta=0.0, delta=0.1, gamma=2.5, omega=2.0)
HARDENING = DuffingParams(alpha=1.0, beta=0.25, delta=0.1, gamma=2.5, omega=2.0)


def reference(params, y0, t_end):
    """High-accuracy adaptive integration used as an independent oracle."""
    def rhs(t, y):
        x, v = y
        f = -params.alpha * x - params.beta * x**3 + params.gamma * math.cos(params.omega * t)
        return [v, -params.delta * v + f / params.mass]

    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", rtol=1e-12, atol=1e-12)
    return sol.y[:, -1]


def integrate(params, y0, t_end, n):
    s = ClassicalState(*y0)
    dt = t_end / n
    for i in range(n):
        s = rk4_step(s, i * dt, dt, params)
    return np.array(s)


def test_derivative_examples():
    p = DuffingParams()
    assert duffing_derivative(ClassicalState(0.0, 0.0), 0.0, p) == (0.0, 2.5)
    q = DuffingParams(alpha=1.0, beta=0.0, delta=0.0, gamma=0.0)
    assert duffing_derivative(ClassicalState(1.0, 0.0), 0.0, q) == (0.0, -1.0)
    dx, dv = duffing_derivative(ClassicalState(2.0, 1.0), 0.0, p)
    assert (dx, dv) == (1.0, pytest.approx(2.4, abs=1e-14))


def test_rk4_free_drift_is_exact():
    p = DuffingParams(alpha=0.0, beta=0.0, delta=0.0, gamma=0.0)
    s = rk4_step(ClassicalState(0.0, 1.0), 0.0, 0.1, p)
    assert s.x == pytest.approx(0.1, abs=1e-16) and s.v == 1.0


def test_rk4_matches_adaptive_reference():
    y = integrate(DuffingParams(), (1.0, -1.5), 10.0, 10000)
    np.testing.assert_allclose(y, reference(DuffingParams(), [1.0, -1.5], 10.0), atol=1e-8)


def test_rk4_fourth_order_self_convergence():
    p = HARDENING
    fine = integrate(p, (1.0, -1.5), 3.0, 3200)
    e1 = np.abs(integrate(p, (1.0, -1.5), 3.0, 100) - fine).max()
    e2 = np.abs(integrate(p, (1.0, -1.5), 3.0, 200) - fine).max()
    assert 14.0 < e1 / e2 < 18.0


def test_rk4_energy_drift_is_fifth_order_per_step():
    p = DuffingParams(alpha=1.0, beta=0.0, delta=0.0, gamma=0.0)

    def drift(dt):
        s = rk4_step(ClassicalState(1.0, 0.0), 0.0, dt, p)
        return abs(0.5 * s.v**2 + 0.5 * s.x**2 - 0.5)

    assert drift(0.1) / drift(0.05) == pytest.approx(64.0, rel=0.05)


def test_sample_ensemble_statistics_and_determinism():
    g, p = GaussianState(), DuffingParams()
    n = 40000
    e = sample_ensemble(g, n, 7, p)
    pts = e.points(p)
    se = 5 / math.sqrt(n)
    assert abs(pts[:, 0].mean() - 1.0) < 5 * math.sqrt(0.5) / math.sqrt(n)
    assert abs(pts[:, 1].mean() + 1.5) < 5 * math.sqrt(2.0) / math.sqrt(n)
    assert pts[:, 0].std() == pytest.approx(math.sqrt(0.5), rel=5 * se)
    assert pts[:, 1].std() == pytest.approx(math.sqrt(2.0), rel=5 * se)
    again = sample_ensemble(g, n, 7, p)
    assert np.array_equal(e.x, again.x) and np.array_equal(e.v, again.v)
    with pytest.raises(ValueError):
        sample_ensemble(g, 0, 7, p)


def test_strobe_at_zero_returns_initial_cloud():
    p = DuffingParams()
    e = sample_ensemble(GaussianState(), 50, 1, p)
    (t, pts), = evolve_ensemble(e, 1.0, 0.01, StrobeSpec.snapshot(0.0), p)
    assert t == 0.0
    assert np.array_equal(pts, e.points(p))


def test_strobe_times_and_off_grid_snapshot():
    p = DuffingParams()
    spec = StrobeSpec.periodic(3, phase=0.25, start=2)
    np.testing.assert_allclose(spec.times(p), (np.arange(3) + 2.25) * p.period)
    e = ClassicalEnsemble(np.array([1.0]), np.array([-1.5]))
    t_snap = 13.37 * p.period
    (t, pts), = evolve_ensemble(e, t_snap, p.period / 1000, StrobeSpec.snapshot(13.37), HARDENING)
    assert t == pytest.approx(t_snap)
    np.testing.assert_allclose(pts[0], reference(HARDENING, [1.0, -1.5], t_snap), atol=1e-8)


def test_harmonic_cloud_follows_closed_form():
    p = HARMONIC
    e = sample_ensemble(GaussianState(), 200, 3, p)
    snaps = evolve_ensemble(e, 40 * p.period, p.period / 1000, StrobeSpec.snapshot(13.37, 40.0), p)
    # linear flow: the cloud centre is the trajectory of the mean initial condition
    (t, pts), (t_late, late) = snaps
    x, v = harmonic_trajectory(t, e.x.mean(), e.v.mean(), p)
    np.testing.assert_allclose(pts.mean(axis=0), [x, v], atol=1e-8)
    A, phi = harmonic_steady_state(p)
    target = [A * math.cos(p.omega * t_late - phi), -A * p.omega * math.sin(p.omega * t_late - phi)]
    np.testing.assert_allclose(late.mean(axis=0), target, atol=1e-2)
    assert np.ptp(late, axis=0).max() < 0.05


def test_convex_hull_contracts_like_exp_minus_delta_t():
    p = HARMONIC
    e = sample_ensemble(GaussianState(), 400, 4, p)
    snaps = evolve_ensemble(e, 5 * p.period, p.period / 1000, StrobeSpec.periodic(6), p)
    areas = [ConvexHull(pts).volume for _, pts in snaps]
    assert all(b <= a for a, b in zip(areas, areas[1:]))
    assert areas[-1] / areas[0] == pytest.approx(math.exp(-p.delta * 5 * p.period), rel=0.1)


def test_overflow_is_raised_or_excluded():
    p = DuffingParams(alpha=0.0, beta=-1.0, delta=0.0, gamma=0.0)
    e = ClassicalEnsemble(np.array([0.1, 5.0]), np.array([0.0, 0.0]))
    with pytest.raises(TrajectoryOverflowError) as info:
        evolve_ensemble(e, 5.0, 0.01, StrobeSpec.snapshot(), p, check_every=10)
    assert info.value.index == 1
    (t, pts), = evolve_ensemble(e, 5.0, 0.01, StrobeSpec(cycles=(5.0 / p.period,)), p,
                                on_overflow="exclude", check_every=10)
    assert np.all(np.isfinite(pts[0])) and np.all(np.isnan(pts[1]))


def test_tangent_linear_oscillator_matches_cosine():
    w0 = 1.7
    p = DuffingParams(alpha=w0**2, beta=0.0, delta=0.0, gamma=0.0)
    s, ts = ClassicalState(0.3, 0.0), TangentState(1.0, 0.0)
    dt = 0.001
    for i in range(10000):
        s, ts = tangent_step(s, ts, i * dt, dt, p)
    assert ts.B == pytest.approx(math.cos(w0 * 10.0), abs=1e-6)
    assert ts.Bdot == pytest.approx(-w0 * math.sin(w0 * 10.0), abs=1e-6)


def test_tangent_damped_linear_solution():
    p = DuffingParams(alpha=1.0, beta=0.0, delta=0.1, gamma=0.0)
    s, ts = ClassicalState(0.0, 0.0), TangentState(1.0, 0.0)
    dt = 0.001
    for i in range(10000):
        s, ts = tangent_step(s, ts, i * dt, dt, p)
    wd = math.sqrt(1 - 0.0025)
    exact = math.exp(-0.05 * 10) * (math.cos(wd * 10) + 0.05 / wd * math.sin(wd * 10))
    assert ts.B == pytest.approx(exact, abs=1e-6)


def test_tangent_rescaling_keeps_log_norm():
    p = DuffingParams(alpha=-1.0, beta=0.0, delta=0.0, gamma=0.0)  # B grows like cosh t
    s, ts = ClassicalState(0.0, 0.0), TangentState(1.0, 0.0)
    dt = 0.01
    for i in range(30000):
        s, ts = tangent_step(s, ts, i * dt, dt, p)
    assert ts.log_scale > 0
    assert math.isfinite(ts.B)
    assert ts.log_norm == pytest.approx(300.0 - 0.5 * math.log(2), rel=1e-6)


def test_lyapunov_of_stable_harmonic_is_minus_half_delta():
    p = HARMONIC
    est = lyapunov_exponent((1.0, -1.5), 10 * p.period, 400 * p.period, p.period / 200, p)
    assert est.value == pytest.approx(-0.05, abs=2e-3)
    assert float(est) == est.value


def test_harmonic_steady_state_examples():
    A, phi = harmonic_steady_state(HARMONIC)
    assert A == pytest.approx(2.5 / math.sqrt(9.04), rel=1e-14)
    assert A == pytest.approx(0.83149, abs=1e-5)
    assert phi == pytest.approx(math.pi - math.atan(0.2 / 3), rel=1e-14)
    assert harmonic_steady_state(HARMONIC.replace(gamma=0.0))[0] == 0.0
    assert harmonic_steady_state(HARMONIC.replace(omega=1.0))[0] == pytest.approx(25.0)
    with pytest.raises(ParameterError):
        harmonic_steady_state(HARDENING)


@pytest.mark.parametrize("alpha,delta", [(1.0, 0.1), (1.0, 3.0), (1.0, 2.0)])
def test_harmonic_trajectory_solves_the_ode(alpha, delta):
    p = DuffingParams(alpha=alpha, beta=0.0, delta=delta, gamma=2.5, omega=2.0)
    x, v = harmonic_trajectory(7.0, 1.0, -1.5, p)
    np.testing.assert_allclose([x, v], reference(p, [1.0, -1.5], 7.0), atol=1e-9)
    x0, v0 = harmonic_trajectory(0.0, 1.0, -1.5, p)
    assert x0 == pytest.approx(1.0) and v0 == pytest.approx(-1.5)


def cubic_oracle(omega, p, damping_scale=1.0):
    c = 0.75 * p.beta
    k = p.alpha - omega**2
    D = damping_scale * p.delta * omega
    roots = np.roots([c * c, 2 * k * c, k * k + D * D, -p.gamma**2])
    u = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
    return np.sqrt(u[u > 0])


def test_three_branches_at_omega_two():
    branches = frequency_response(HARDENING, [2.0])
    assert len(branches) == 3
    assert [b.stable for b in branches] == [True, False, True]
    np.testing.assert_allclose([b.amplitude for b in branches], cubic_oracle(2.0, HARDENING), rtol=1e-9)
    for b in branches:
        assert abs(response_residual(b.amplitude, 2.0, HARDENING)) < 1e-10


def test_literal_damping_switch():
    lit = frequency_response(HARDENING, [2.0], damping="literal")
    np.testing.assert_allclose([b.amplitude for b in lit], cubic_oracle(2.0, HARDENING, 2.0), rtol=1e-9)


def test_linear_limit_matches_closed_form():
    for w in (0.5, 1.0, 2.0, 3.3):
        p = HARMONIC.replace(omega=w)
        (b,) = frequency_response(p, [w])
        assert b.amplitude == pytest.approx(harmonic_steady_state(p)[0], rel=1e-12)


def test_zero_drive_has_no_branch():
    assert frequency_response(HARDENING.replace(gamma=0.0), [2.0]) == []


@settings(max_examples=40, deadline=None)
@given(omega=st.floats(0.2, 4.0), gamma=st.floats(0.1, 5.0),
       beta=st.one_of(st.just(0.0), st.floats(1e-3, 1.0)))
def test_branches_match_cubic_oracle_and_residual(omega, gamma, beta):
    p = HARDENING.replace(gamma=gamma, beta=beta)
    amps = [b.amplitude for b in frequency_response(p, [omega])]
    oracle = cubic_oracle(omega, p) if beta > 0 else [harmonic_steady_state(p.replace(omega=omega))[0]]
    assert len(amps) == len(oracle)
    np.testing.assert_allclose(amps, oracle, rtol=1e-7)
    for A in amps:
        assert abs(response_residual(A, omega, p)) < 1e-10 * max(1.0, gamma**2)


def test_stable_branches_grow_with_drive():
    base = frequency_response(HARDENING, [2.0])
    more = frequency_response(HARDENING.replace(gamma=2.5 * 1.01), [2.0])
    for b0, b1 in zip(base, more):
        if b0.stable:
            assert b1.amplitude > b0.amplitude
