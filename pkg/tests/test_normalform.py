"""Normal-form operators, the fixed-point map, and the Picard solver."""

import numpy as np
import pytest

from halfline_dnls import (ContractionThresholdError, EquationSpec,
                           NormalFormOperators, PanelGrid, SpectralState,
                           Trajectory, cascade_integrate, picard_solve,
                           sobolev_norm)
from halfline_dnls.spectral import dispersion_mu


def state(modes, M, time=0.0):
    return SpectralState.from_modes(modes, M, time)


# -- boundary operator -------------------------------------------------------------

@pytest.mark.parametrize("alpha", [3.0, 4.0])
def test_boundary_single_mode_pair(alpha):
    # only decomposition of 2 is (1,1): (2/2) e^{it Phi}/Phi a^2,
    # Phi = 2 - 2^alpha
    a, t = 0.3 - 0.1j, 0.7
    ops = NormalFormOperators(EquationSpec.pure_power(1, alpha), 6)
    out = ops.boundary_term(state({1: a}, 6), t)
    phase = 2.0 - 2.0**alpha
    assert out[2] == pytest.approx(np.exp(1j * t * phase) / phase * a**2,
                                   rel=1e-13)


def test_boundary_zero_state():
    ops = NormalFormOperators(EquationSpec.pure_power(2, 3.0), 8)
    out = ops.boundary_term(np.zeros(9, dtype=complex), 0.3)
    assert np.all(out == 0)


def test_boundary_mode_one_always_empty():
    # 1 has no decomposition into k+1 >= 2 positive parts
    ops = NormalFormOperators(EquationSpec.pure_power(1, 3.0), 6)
    rng = np.random.default_rng(2)
    v = 0.1 * (rng.standard_normal(7) + 1j * rng.standard_normal(7))
    v[0] = 0.0
    assert ops.boundary_term(v, 0.5)[1] == 0


def test_boundary_brute_force_oracle():
    # independent enumeration of ordered compositions, k = 2
    alpha, M, t = 3.0, 8, 0.4
    rng = np.random.default_rng(9)
    v = 0.1 * (rng.standard_normal(M + 1) + 1j * rng.standard_normal(M + 1))
    v[0] = 0.0
    ops = NormalFormOperators(EquationSpec.pure_power(2, alpha), M)
    got = ops.boundary_term(v, t)
    for n in (3, 5, 8):
        total = 0.0
        for n1 in range(1, n):
            for n2 in range(1, n - n1):
                n3 = n - n1 - n2
                if n3 < 1:
                    continue
                phase = -float(n)**alpha + float(n1)**alpha \
                    + float(n2)**alpha + float(n3)**alpha
                total += (np.exp(1j * t * phase) / phase
                          * v[n1] * v[n2] * v[n3])
        total *= n / 3.0
        assert got[n] == pytest.approx(total, rel=1e-12)


# -- bulk operator -------------------------------------------------------------------

def test_bulk_zero_state():
    ops = NormalFormOperators(EquationSpec.pure_power(1, 3.0), 6)
    assert np.all(ops.bulk_term(np.zeros(7, dtype=complex), 0.2) == 0)


def test_bulk_low_modes_empty_for_k1():
    # outer sum needs n >= 3, inner needs the last slot >= 2
    ops = NormalFormOperators(EquationSpec.pure_power(1, 3.0), 8)
    rng = np.random.default_rng(4)
    v = 0.1 * (rng.standard_normal(9) + 1j * rng.standard_normal(9))
    v[0] = 0.0
    out = ops.bulk_term(v, 0.9)
    assert out[1] == 0 and out[2] == 0


def test_bulk_single_mode_hand_value():
    # k=1, v = a delta_1, alpha = 3, mode 3: outer tuples (1,2) and (2,1);
    # only (1,2) survives, inner (1,1):
    #   -(3/2) (e^{it Phi(1,2)}/Phi(1,2)) a * 2i e^{it Phi(1,1)} a^2
    #   = (i a^3 / 6) e^{-24 i t}
    a, t = 0.2 + 0.05j, 0.6
    ops = NormalFormOperators(EquationSpec.pure_power(1, 3.0), 6)
    out = ops.bulk_term(state({1: a}, 6), t)
    assert out[3] == pytest.approx((1j * a**3 / 6) * np.exp(-24j * t),
                                   rel=1e-13)
    phi12, phi11 = -18.0, -6.0
    direct = (-(3 / 2) * (np.exp(1j * t * phi12) / phi12) * a
              * 1j * 2 * np.exp(1j * t * phi11) * a * a)
    assert out[3] == pytest.approx(direct, rel=1e-13)


# -- fixed-point map -----------------------------------------------------------------

def _constant_trajectory(phi, T, freq):
    grid = PanelGrid.for_frequency(T, freq)
    vals = np.broadcast_to(
        np.asarray(phi.coeffs)[:, None, None],
        (phi.coeffs.size, grid.n_panels, grid.q)).copy()
    return Trajectory(spec=EquationSpec.pure_power(1, 3.0), grid=grid,
                      modes=np.arange(phi.coeffs.size), values=vals,
                      truncation=phi.truncation, quadrature_tolerance=1e-10,
                      initial_state=phi, variable="v")


def test_integral_map_on_constant_data():
    # the first Picard iterate: value phi at t = 0, boundary-term increment
    # at later times
    phi = state({1: 0.04, 2: 0.03}, 8)
    ops = NormalFormOperators(EquationSpec.pure_power(1, 3.0), 8)
    traj = _constant_trajectory(phi, 0.5, 2 * 8.0**3)
    out = ops.integral_map(traj, phi)
    assert np.max(np.abs(out.coeffs_at(0.0) - phi.coeffs)) < 1e-12
    t = 0.3
    direct = (np.asarray(phi.coeffs)
              + ops.boundary_term(phi, t) - ops.boundary_term(phi, 0.0))
    # the bulk integral of a constant state is not zero but fourth order
    assert np.max(np.abs(out.coeffs_at(t) - direct)) < 5e-6


def test_integral_map_zero_data():
    phi = SpectralState(np.zeros(7, dtype=complex))
    ops = NormalFormOperators(EquationSpec.pure_power(1, 3.0), 6)
    out = ops.integral_map(_constant_trajectory(phi, 0.4, 500.0), phi)
    assert np.max(np.abs(out.values)) == 0.0


# -- picard solver --------------------------------------------------------------------

def test_picard_zero_data_one_iteration():
    phi = SpectralState(np.zeros(9, dtype=complex))
    traj, log = picard_solve(phi, EquationSpec.pure_power(1, 3.0), 1.0)
    assert log.converged
    assert len(log.iterations) == 1
    assert np.max(np.abs(traj.values)) == 0.0


def test_picard_agrees_with_cascade_k2():
    # independent pipelines on the same truncated system, cubic nonlinearity
    phi = state({1: 0.05}, 10)
    spec = EquationSpec.pure_power(2, 3.0)
    u_traj = cascade_integrate(phi, spec, 0.5)
    v_traj, log = picard_solve(phi, spec, 0.5, tol=1e-12)
    assert log.converged
    mu = dispersion_mu(3.0, np.arange(11))
    for t in np.linspace(0.0, 0.5, 9):
        u_from_v = v_traj.coeffs_at(t) * np.exp(1j * mu * t)
        assert np.max(np.abs(u_from_v - u_traj.coeffs_at(t))) < 1e-10


def test_picard_fixed_point_residual():
    phi = state({1: 0.05, 2: 0.05}, 12)
    tol = 1e-10
    traj, log = picard_solve(phi, EquationSpec.pure_power(1, 3.0), 1.0, tol=tol)
    assert log.converged
    assert log.final_residual <= 10 * tol


def test_picard_ratios_shrink_with_data():
    spec = EquationSpec.pure_power(1, 3.0)
    _, log_big = picard_solve(state({1: 0.06, 2: 0.06}, 10), spec, 1.0)
    _, log_small = picard_solve(state({1: 0.03, 2: 0.03}, 10), spec, 1.0)
    assert max(log_small.ratios) < max(log_big.ratios)
    assert all(r < 1 for r in log_big.ratios + log_small.ratios)


def test_picard_support_preservation():
    # data on mode 2 only: every iterate lives on even modes
    phi = state({2: 0.05}, 12)
    traj, _ = picard_solve(phi, EquationSpec.pure_power(1, 3.0), 0.5)
    odd = traj.values[1::2]
    assert np.max(np.abs(odd)) == 0.0


def test_picard_rejects_large_data():
    with pytest.raises(ContractionThresholdError):
        picard_solve(state({1: 0.8}, 8), EquationSpec.pure_power(1, 3.0), 1.0)


def test_picard_rejects_low_alpha_without_flag():
    with pytest.raises(ValueError, match="alpha"):
        picard_solve(state({1: 0.01}, 8), EquationSpec.pure_power(1, 2.0), 0.5)


def test_picard_unsafe_flag_runs_low_alpha():
    phi = state({1: 0.01}, 8)
    spec = EquationSpec.pure_power(1, 2.5)
    traj, log = picard_solve(phi, spec, 0.2, allow_unsafe=True)
    assert log.converged
    u_traj = cascade_integrate(phi, spec, 0.2)
    mu = dispersion_mu(2.5, np.arange(9))
    t = 0.2
    u_from_v = traj.coeffs_at(t) * np.exp(1j * mu * t)
    assert np.max(np.abs(u_from_v - u_traj.coeffs_at(t))) < 1e-9


def test_picard_dispersion_kind_irrelevant_on_one_sided_data():
    from halfline_dnls import DispersionKind
    phi = state({1: 0.04, 2: 0.04}, 8)
    sch = EquationSpec.pure_power(1, 3.0, kind=DispersionKind.SCHRODINGER)
    odd = EquationSpec.pure_power(1, 3.0, kind=DispersionKind.AIRY_TYPE)
    va, _ = picard_solve(phi, sch, 0.5)
    vb, _ = picard_solve(phi, odd, 0.5)
    assert np.array_equal(va.values, vb.values)


def test_picard_requires_mean_zero():
    with pytest.raises(ValueError, match="mean-zero"):
        picard_solve(state({0: 0.1, 1: 0.01}, 6),
                     EquationSpec.pure_power(1, 3.0), 0.5)


# -- certified estimates ----------------------------------------------------------------

def test_operator_norms_within_certified_constants():
    # |N(v)|_{H1} <= C_N |v|^{k+1} and |B(v)|_{H1} <= bulk-bound(|v|),
    # with constants certified from the phase table
    M, k = 12, 1
    spec = EquationSpec.pure_power(k, 3.0)
    ops = NormalFormOperators(spec, M)
    c_boundary, kappa_bulk, ell1 = ops.young_constants()
    rng = np.random.default_rng(17)
    for _ in range(25):
        v = 0.05 * (rng.standard_normal(M + 1) + 1j * rng.standard_normal(M + 1))
        v[0] = 0.0
        r = sobolev_norm(v, 1.0)
        t = float(rng.uniform(0, 1))
        n_val = sobolev_norm(ops.boundary_term(v, t), 1.0)
        assert n_val <= c_boundary[k] * r ** (k + 1) * (1 + 1e-9)
        b_val = sobolev_norm(ops.bulk_term(v, t), 1.0)
        bulk_bound = (kappa_bulk[k] * (ell1 * r) ** k
                      * (k + 1) * (ell1 * r) ** k * r)
        assert b_val <= bulk_bound * (1 + 1e-9)


def test_smallness_report_fields():
    ops = NormalFormOperators(EquationSpec.pure_power(1, 3.0), 16)
    rep = ops.smallness_report(state({1: 0.05, 2: 0.05}, 16), 1.0)
    assert rep.accepted
    assert rep.lhs < rep.rhs
    d = rep.to_dict()
    assert set(d) >= {"accepted", "phi_h1", "ball_lhs", "ball_rhs"}
