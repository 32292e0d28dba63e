"""Cascade solver: forcing values, closed forms, residuals, transforms."""

import math

import numpy as np
import pytest

from halfline_dnls import (DispersionKind, EquationSpec, OverflowGuardError,
                           SpectralState, Trajectory, cascade_integrate,
                           linear_solve, mean_zero_inverse,
                           mean_zero_transform, nonlinear_forcing,
                           sobolev_norm, standard_windows, weak_residual)


def state(modes, M, time=0.0):
    return SpectralState.from_modes(modes, M, time)


# -- nonlinear_forcing ------------------------------------------------------------

def test_forcing_vanishes_at_smallest_supported_mode():
    # mean-zero data: no way to split the lowest mode into >= 2 positive parts
    u = state({3: 0.5, 7: 0.2}, 12)
    spec = EquationSpec.pure_power(2, 3.0)
    assert nonlinear_forcing(u, spec, 3) == 0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_forcing_carrier_self_term(k):
    c, a, N = 0.4 - 0.1j, 0.2j, 5
    u = state({0: c, N: a}, 3 * N)
    spec = EquationSpec.pure_power(k, 2.0)
    # the derivative factor kills terms differentiating the constant:
    # remaining contribution i N c^k a
    assert nonlinear_forcing(u, spec, N) == pytest.approx(1j * N * c**k * a)


def test_forcing_second_harmonic():
    # k = 1, mode 2N of c + a e^{iNx}: u u_x = (1/2)(u^2)_x picks a^2/2
    c, a, N = 0.4 - 0.1j, 0.2j, 5
    u = state({0: c, N: a}, 2 * N)
    spec = EquationSpec.pure_power(1, 2.0)
    assert nonlinear_forcing(u, spec, 2 * N) == pytest.approx(
        1j * (2 * N) * a * a / 2)


def test_forcing_brute_force_oracle():
    # independent enumeration of ordered decompositions, k = 2
    rng = np.random.default_rng(5)
    M, k, n = 9, 2, 7
    c = 0.1 * (rng.standard_normal(M + 1) + 1j * rng.standard_normal(M + 1))
    u = SpectralState(c)
    spec = EquationSpec.pure_power(k, 3.0)
    total = 0.0
    for n1 in range(n + 1):
        for n2 in range(n - n1 + 1):
            n3 = n - n1 - n2
            total += c[n1] * c[n2] * (1j * n3) * c[n3]
    assert nonlinear_forcing(u, spec, n) == pytest.approx(total, rel=1e-12)


# -- cascade closed forms -----------------------------------------------------------

@pytest.mark.parametrize("alpha,k", [(2.0, 1), (2.0, 2), (3.0, 1)])
def test_carrier_mode_closed_form(alpha, k):
    # u(t, N) = a e^{it(N^alpha + c^k N)} when lower modes are only the mean
    c, a, N, T = 0.3 * np.exp(0.7j), 0.01, 4, 0.8
    phi = state({0: c, N: a}, 3 * N)
    spec = EquationSpec.pure_power(k, alpha)
    traj = cascade_integrate(phi, spec, T)
    got = traj.mode_values(N, [T])[0]
    expected = a * np.exp(1j * T * (N**alpha + c**k * N))
    assert abs(got - expected) < 1e-12


def test_zero_data_gives_zero_trajectory():
    phi = SpectralState(np.zeros(9, dtype=complex))
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 2.0), 1.0)
    assert traj.modes.size == 0
    assert sobolev_norm(traj.state_at(0.7), 0.0) == 0.0


def test_pure_constant_data_is_stationary():
    c = 0.3 - 0.2j
    phi = state({0: c}, 6)
    traj = cascade_integrate(phi, EquationSpec.pure_power(2, 2.0), 1.0)
    assert list(traj.modes) == [0]
    assert np.all(traj.values == c)


def closed_form_mode2(a, b, t):
    """Independent oracle, k=1, alpha=3, data a*e^{ix} + b*e^{2ix}."""
    return b * np.exp(8j * t) + (a**2 / 6) * (np.exp(8j * t) - np.exp(2j * t))


def closed_form_mode3(a, b, t):
    def E(beta):
        return (np.exp(1j * beta * t) - np.exp(27j * t)) / (1j * (beta - 27))

    return 3j * ((a * b + a**3 / 6) * E(9) - (a**3 / 6) * E(3))


def test_low_mode_exponential_oracle():
    a = b = 0.1
    phi = state({1: a, 2: b}, 6)
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 3.0), 1.0)
    for t in (0.25, 1.0):
        assert abs(traj.mode_values(2, [t])[0]
                   - closed_form_mode2(a, b, t)) < 1e-12
        assert abs(traj.mode_values(3, [t])[0]
                   - closed_form_mode3(a, b, t)) < 1e-12
    # frozen oracle values (computed from the closed forms above)
    assert traj.mode_values(2, [0.25])[0] == pytest.approx(
        -0.043770899318776764 + 0.09164619582960397j, abs=1e-12)
    assert traj.mode_values(3, [0.25])[0] == pytest.approx(
        0.0025741941640349815 - 0.0005510022359684302j, abs=1e-12)
    # small-t Duhamel expansion: u3 = 3i a b t + O(t^2)
    t_small = 1e-4
    assert traj.mode_values(3, [t_small])[0] == pytest.approx(
        3j * a * b * t_small, rel=5e-3)


def test_against_independent_rk4_integrator():
    # classic fixed-step RK4 on the full coupled mode system, with the
    # right-hand side written from scratch via plain convolutions
    M, k, alpha, T = 6, 1, 2.0, 0.2
    c = np.zeros(M + 1, dtype=complex)
    c[0], c[1] = 0.2, 0.1
    mu = np.arange(M + 1, dtype=float) ** alpha
    n = np.arange(M + 1)

    def rhs(u):
        conv = np.convolve(u, u)[: M + 1]
        return 1j * mu * u + (1j * n / 2) * conv

    steps = 8000
    dt = T / steps
    u = c.copy()
    for _ in range(steps):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u = u + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    traj = cascade_integrate(SpectralState(c),
                             EquationSpec.pure_power(k, alpha), T)
    assert np.max(np.abs(traj.coeffs_at(T) - u)) < 1e-9


def test_mode0_conserved_exactly():
    phi = state({0: 0.25 - 0.1j, 2: 0.05}, 8)
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 2.0), 1.0)
    r0 = int(np.searchsorted(traj.modes, 0))
    assert np.all(traj.values[r0] == phi.coeffs[0])


def test_support_containment_unrestricted():
    # integrate every mode; off-semigroup modes must stay at zero
    N, M = 5, 20
    phi = state({0: 0.2, N: 0.1}, M)
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 2.0), 0.5,
                             restrict_support=False)
    allowed = {0, 5, 10, 15, 20}
    for r, n in enumerate(traj.modes):
        if int(n) not in allowed:
            assert np.max(np.abs(traj.values[r])) <= 1e-14


def test_restricted_matches_unrestricted():
    phi = state({0: 0.2, 3: 0.1}, 12)
    spec = EquationSpec.pure_power(1, 2.0)
    t_r = cascade_integrate(phi, spec, 0.6, restrict_support=True)
    t_f = cascade_integrate(phi, spec, 0.6, restrict_support=False)
    for t in (0.0, 0.3, 0.6):
        assert np.max(np.abs(t_r.coeffs_at(t) - t_f.coeffs_at(t))) < 1e-13


def test_truncation_exactness():
    # retained modes agree between truncations M and 2M up to quadrature tol
    phi_lo = state({0: 0.2, 2: 0.1, 3: 0.05j}, 8)
    phi_hi = state({0: 0.2, 2: 0.1, 3: 0.05j}, 16)
    spec = EquationSpec.pure_power(1, 2.0)
    lo = cascade_integrate(phi_lo, spec, 1.0)
    hi = cascade_integrate(phi_hi, spec, 1.0)
    for t in np.linspace(0, 1.0, 7):
        d = lo.coeffs_at(t) - hi.coeffs_at(t)[:9]
        assert np.max(np.abs(d)) < 1e-10


def test_dispersion_variant_equality_bitwise():
    phi = state({0: 0.2, 1: 0.1}, 6)
    a = cascade_integrate(phi, EquationSpec.pure_power(
        1, 3.0, kind=DispersionKind.SCHRODINGER), 0.5)
    b = cascade_integrate(phi, EquationSpec.pure_power(
        1, 3.0, kind=DispersionKind.AIRY_TYPE), 0.5)
    assert np.array_equal(a.values, b.values)


def test_growth_bound_small_data():
    # mild version of the continuity argument: small mean-zero data stays
    # within twice its initial H^1 norm up to T = 1
    phi = state({1: 0.02, 2: 0.02j}, 12)
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 3.0), 1.0)
    assert traj.sup_sobolev_norm(1.0) <= 2 * sobolev_norm(phi, 1.0)


def test_overflow_guard_trips():
    # strongly growing background: e^{t n |Im c|} passes 1e100 for n = 14
    phi = state({0: -20j, 1: 1.0}, 14)
    spec = EquationSpec.pure_power(1, 2.0)
    with pytest.raises(OverflowGuardError):
        cascade_integrate(phi, spec, 1.0)


# -- linear closed forms -----------------------------------------------------------

def test_linear_norm_growth_complex_coefficient():
    N, lam = 6, 0.3 - 0.8j
    phi = state({N: 1.0}, 8)
    for t in (0.1, 0.5, 1.0):
        v = linear_solve(phi, lam, t)                 # transport frame
        assert sobolev_norm(v, 0.0) == pytest.approx(
            math.exp(-t * lam.imag * N), rel=1e-12)
        u = linear_solve(phi, lam, t, alpha=2.0)      # full equation
        assert sobolev_norm(u, 0.0) == pytest.approx(
            math.exp(-t * lam.imag * N), rel=1e-12)


def test_linear_zero_coefficient_is_free_evolution():
    phi = state({2: 1.0}, 4)
    v = linear_solve(phi, 0.0, 0.7)
    assert np.array_equal(v.coeffs, phi.coeffs)


def test_linear_real_coefficient_preserves_l2():
    phi = state({1: 0.5, 3: 0.25j}, 4)
    for t in (0.2, 0.9):
        v = linear_solve(phi, 0.7, t, alpha=2.0)
        assert sobolev_norm(v, 0.0) == pytest.approx(
            sobolev_norm(phi, 0.0), rel=1e-14)


def test_linear_matches_cascade_degree_zero():
    lam = 0.2 - 0.5j
    phi = state({1: 0.3, 4: 0.1j}, 6)
    spec = EquationSpec(2.0, {0: lam})
    traj = cascade_integrate(phi, spec, 1.0)
    for t in (0.3, 1.0):
        direct = linear_solve(phi, lam, t, alpha=2.0)
        assert np.max(np.abs(traj.coeffs_at(t) - direct.coeffs)) < 1e-11


# -- weak residual -----------------------------------------------------------------

def test_weak_residual_closed_form_single_mode():
    N, lam, T = 4, 0.3 - 0.6j, 1.0
    phi = state({N: 1.0}, 12)
    traj = cascade_integrate(phi, EquationSpec(2.0, {0: lam}), T)
    for window in standard_windows(T):
        for m in range(traj.truncation + 1):
            assert abs(weak_residual(traj, m, window)) < 1e-9, window.name


def test_weak_residual_zero_trajectory():
    traj = cascade_integrate(SpectralState(np.zeros(7, dtype=complex)),
                             EquationSpec.pure_power(1, 2.0), 1.0)
    for window in standard_windows(1.0):
        assert weak_residual(traj, 3, window) == 0


def test_weak_residual_nonlinear_trajectory():
    phi = state({0: 0.2, 1: 0.1}, 8)
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 2.0), 1.0)
    for window in standard_windows(1.0):
        for m in range(9):
            assert abs(weak_residual(traj, m, window)) < 1e-9


def test_weak_residual_detects_violation():
    phi = state({0: 0.2, 1: 0.1}, 8)
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 2.0), 1.0)
    tampered_values = traj.values.copy()
    r1 = int(np.searchsorted(traj.modes, 1))
    tampered_values[r1] *= 2.0
    tampered = Trajectory(spec=traj.spec, grid=traj.grid, modes=traj.modes,
                          values=tampered_values, truncation=traj.truncation,
                          quadrature_tolerance=traj.quadrature_tolerance,
                          initial_state=traj.initial_state)
    window = standard_windows(1.0)[2]
    assert abs(weak_residual(tampered, 1, window)) > 1e-3


# -- mean-zero frame ----------------------------------------------------------------

def test_transform_at_time_zero_subtracts_mean():
    phi = state({0: 0.3 - 0.2j, 2: 0.1}, 8)
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 2.0), 0.5)
    w = mean_zero_transform(traj)
    w0 = w.state_at(0.0)
    assert abs(w0.coeffs[0]) < 1e-13
    assert w0.coeffs[2] == pytest.approx(phi.coeffs[2], abs=1e-13)


def test_transform_round_trip():
    phi = state({0: 0.3 * np.exp(-1.2j), 2: 0.1}, 10)
    spec = EquationSpec.pure_power(2, 2.0)
    traj = cascade_integrate(phi, spec, 0.8)
    w = mean_zero_transform(traj)
    back = mean_zero_inverse(w, phi.coeffs[0], spec)
    assert np.max(np.abs(back.values - traj.values)) < 1e-13


@pytest.mark.parametrize("k", [1, 2])
def test_recentered_trajectory_solves_recentered_equation(k):
    # w must satisfy its own mode ODEs with the binomial coefficient
    # nonlinearity sum_j C(k,j) m0^{k-j} w^j w_x -- checked per degree j,
    # which pins the 1/(j+1) forcing factors
    phi = state({0: 0.25 * np.exp(-0.4j), 1: 0.06, 2: 0.04j}, 10)
    spec = EquationSpec.pure_power(k, 3.0)
    traj = cascade_integrate(phi, spec, 0.5)
    w = mean_zero_transform(traj)
    expected = {j: math.comb(k, j) * phi.coeffs[0] ** (k - j)
                for j in range(1, k + 1)}
    assert set(w.spec.nonlin_coeffs) == set(expected)
    for j, lam in expected.items():
        assert w.spec.nonlin_coeffs[j] == pytest.approx(lam)
    times = w.grid.node_times()
    mu = np.array([float(n) ** 3 for n in range(11)])
    for p in (0, w.n_panels // 2, w.n_panels - 1):
        for i in (0, w.grid.q // 2):
            t = times[p, i]
            dense = w.panel_node_values(p, dense=True)[:, i]
            ws = SpectralState(dense, time=t)
            for n in w.modes:
                n = int(n)
                dw = w.mode_derivative_values(n, p)[i]
                rhs = (1j * mu[n] * dense[n]
                       + nonlinear_forcing(ws, w.spec, n))
                assert abs(dw - rhs) < 1e-7


def test_transform_warns_on_growing_multiplier():
    phi = state({0: 0.3j, 1: 0.05}, 6)   # Im(m0^1) > 0
    traj = cascade_integrate(phi, EquationSpec.pure_power(1, 2.0), 0.2)
    with pytest.warns(UserWarning):
        mean_zero_transform(traj)
