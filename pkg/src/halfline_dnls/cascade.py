"""Reference solver: mode-by-mode Duhamel quadrature.

On one-sided spectra the nonlinearity couples mode n only to modes below it,
plus a self-interaction through the constant background: with
``c = u(0)`` (which is conserved) mode n >= 1 obeys the scalar linear ODE

    d/dt u_n = i (mu(n) + n * sum_l lambda_l c^l) u_n + g_n(t),

where g_n collects products of strictly lower supported modes.  Solving the
modes in increasing order therefore yields, up to quadrature error, the
*exact* solution of the truncated system, which in turn agrees with the
full equation on all retained modes.  The stiff dispersive factor is
handled by exact integrating factors, so there is no step-size stability
constraint.

The module also provides the linear (degree-0) closed form, the
weak-formulation residual checker, and the transform to the mean-zero
frame that removes the constant background from the nonlinearity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb, factorial
from typing import Callable, Optional

import numpy as np

from .phase import support_semigroup
from .quadrature import (DEFAULT_POINTS, OverflowGuardError, PanelGrid,
                         QuadratureError, RADIANS_PER_PANEL)
from .spectral import (DispersionKind, EquationSpec, SpectralState,
                       dispersion_mu, dispersion_symbol, power)
from .trajectory import Trajectory

__all__ = [
    "nonlinear_forcing",
    "cascade_integrate",
    "linear_solve",
    "mean_zero_transform",
    "mean_zero_inverse",
    "TimeWindow",
    "standard_windows",
    "weak_residual",
]


def nonlinear_forcing(state: SpectralState, spec: EquationSpec, n: int) -> complex:
    """Mode-n value of ``(sum_l lambda_l u^l) u_x``.

    Computed as ``sum_l lambda_l (i n / (l+1)) (u^{l+1})(n)``; by one-sided
    triangularity only modes <= n enter.
    """
    if not 0 <= n <= state.truncation:
        raise ValueError(f"mode {n} outside truncation {state.truncation}")
    total = 0.0 + 0.0j
    for deg, lam in spec.nonlin_coeffs.items():
        total += lam * (1j * n / (deg + 1)) * power(state.coeffs, deg + 1)[n]
    return complex(total)


# -- decomposition tables ----------------------------------------------------

def _multisets(target: int, parts: int, cands_desc: list) -> list:
    """Nonincreasing `parts`-tuples from cands_desc summing to target,
    with their permutation counts."""
    out = []

    def rec(rem, left, start, cur):
        if left == 0:
            if rem == 0:
                out.append(tuple(cur))
            return
        for i in range(start, len(cands_desc)):
            v = cands_desc[i]
            if v * left < rem:
                break               # candidates are descending
            if v > rem:
                continue
            cur.append(v)
            rec(rem - v, left - 1, i, cur)
            cur.pop()

    rec(target, parts, 0, [])
    result = []
    for tup in out:
        mult = 1
        counts = {}
        for v in tup:
            counts[v] = counts.get(v, 0) + 1
        perms = factorial(parts)
        for c in counts.values():
            perms //= factorial(c)
        result.append((tup, perms))
    return result


class _ForcingTables:
    """Per target mode, index arrays into the support rows for every
    nonlinearity degree, with multinomial weights."""

    def __init__(self, support: np.ndarray, spec: EquationSpec):
        pos = {int(v): r for r, v in enumerate(support)}
        self.per_row = []
        for n in support:
            n = int(n)
            entries = {}
            if n >= 1:
                cands = sorted((int(v) for v in support if v < n), reverse=True)
                for deg, lam in spec.nonlin_coeffs.items():
                    if deg < 1:
                        continue    # degree 0 is pure self-interaction
                    rows = _multisets(n, deg + 1, cands)
                    if rows:
                        idx = np.array([[pos[v] for v in tup] for tup, _ in rows])
                        wts = np.array([float(w) for _, w in rows])
                        entries[deg] = (idx, wts)
            self.per_row.append(entries)

    def forcing(self, row: int, n: int, spec: EquationSpec,
                vals: np.ndarray) -> Optional[np.ndarray]:
        """Forcing of mode ``n`` (one support row) at the panel nodes,
        excluding the self-interaction term.  ``vals`` holds this panel's
        node values for all lower rows."""
        entries = self.per_row[row]
        if not entries:
            return None
        acc = None
        for deg, (idx, wts) in entries.items():
            prod = np.prod(vals[idx], axis=1)      # (rows, q)
            term = spec.nonlin_coeffs[deg] * (1j * n / (deg + 1)) * (wts @ prod)
            acc = term if acc is None else acc + term
        return acc


# -- cascade integrator -------------------------------------------------------

def cascade_integrate(phi: SpectralState, spec: EquationSpec, T: float,
                      tol: float = 1e-10, restrict_support: bool = True,
                      q: int = DEFAULT_POINTS,
                      radians_per_panel: float = RADIANS_PER_PANEL,
                      max_refinements: int = 3,
                      overflow_guard: float = 1e100) -> Trajectory:
    """Evolve ``phi`` under ``spec`` up to time T.

    With ``restrict_support`` the solver tracks only the additive semigroup
    generated by the support of ``phi`` (all other modes are identically
    zero); otherwise every mode up to the truncation is integrated, which is
    slower but lets the support confinement emerge numerically.

    Raises QuadratureError when the Chebyshev tails still exceed ``tol``
    after ``max_refinements`` panel doublings, and OverflowGuardError when a
    mode magnitude passes ``overflow_guard``.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    M = phi.truncation
    if restrict_support:
        gens = {n for n in range(M + 1) if phi.coeffs[n] != 0}
        support = np.array(sorted(support_semigroup(gens, M)), dtype=int)
    else:
        support = np.arange(M + 1)

    if support.size == 0:
        grid = PanelGrid.for_frequency(T, 1.0, q=q,
                                       radians_per_panel=radians_per_panel)
        values = np.zeros((0, grid.n_panels, grid.q), dtype=complex)
        return Trajectory(spec=spec, grid=grid, modes=support, values=values,
                          truncation=M, quadrature_tolerance=tol,
                          initial_state=phi, variable="u")

    c0 = complex(phi.coeffs[0]) if support[0] == 0 else 0.0 + 0.0j
    shift = spec.self_coupling(c0)
    mu = dispersion_symbol(spec, support).astype(complex)
    omega = mu + support * shift
    freq = 2.0 * float(np.max(np.abs(mu) + support * abs(shift))) + 1.0

    tables = _ForcingTables(support, spec)
    init = phi.coeffs[support]

    grid = PanelGrid.for_frequency(T, freq, q=q,
                                   radians_per_panel=radians_per_panel)
    for _ in range(max_refinements + 1):
        values, worst_tail, worst_mode = _march(grid, support, omega, c0, init,
                                                tables, spec, overflow_guard)
        if worst_tail <= tol:
            return Trajectory(spec=spec, grid=grid, modes=support,
                              values=values, truncation=M,
                              quadrature_tolerance=tol, initial_state=phi,
                              variable="u")
        grid = grid.refined()
    raise QuadratureError(
        f"quadrature did not converge: worst Chebyshev tail {worst_tail:.3e} "
        f"> tol {tol:.3e} at mode {worst_mode}",
        worst_mode=worst_mode, tail=worst_tail)


def _march(grid, support, omega, c0, init, tables, spec, overflow_guard):
    sch = grid.scheme
    n_rows = support.size
    out = np.empty((n_rows, grid.n_panels, grid.q), dtype=complex)
    carry = np.array(init, dtype=complex)
    times = grid.node_times()
    widths = grid.widths()
    worst_tail, worst_mode = 0.0, None
    start = 1 if support[0] == 0 else 0
    for p in range(grid.n_panels):
        h = widths[p]
        dt = times[p] - grid.breaks[p]
        vals = np.zeros((n_rows, grid.q), dtype=complex)
        if start == 1:
            vals[0, :] = c0
        for r in range(start, n_rows):
            n = int(support[r])
            g = tables.forcing(r, n, spec, vals)
            ph = np.exp(1j * omega[r] * dt)
            if g is None:
                vals[r, :] = ph * carry[r]
                carry[r] = np.exp(1j * omega[r] * h) * carry[r]
            else:
                psi = g / ph
                J = 0.5 * h * (sch.antideriv_nodes @ psi)
                vals[r, :] = ph * (carry[r] + J)
                carry[r] = np.exp(1j * omega[r] * h) * (
                    carry[r] + 0.5 * h * (sch.antideriv_end @ psi))
        out[:, p, :] = vals
        if np.max(np.abs(carry), initial=0.0) > overflow_guard:
            n_bad = int(support[int(np.argmax(np.abs(carry)))])
            raise OverflowGuardError(
                f"mode {n_bad} exceeded {overflow_guard:g} at "
                f"t={grid.breaks[p + 1]:g}")
        coeffs = vals @ sch.coeff_map.T
        tail = np.max(np.abs(coeffs[:, -2:]), axis=1)
        scale = np.maximum(np.max(np.abs(coeffs), axis=1), 1e-300)
        ratios = np.where(scale > 1e-290, tail / scale, 0.0)
        r_bad = int(np.argmax(ratios))
        if ratios[r_bad] > worst_tail:
            worst_tail = float(ratios[r_bad])
            worst_mode = int(support[r_bad])
    return out, worst_tail, worst_mode


# -- closed forms --------------------------------------------------------------

def linear_solve(phi: SpectralState, lam: complex, t: float,
                 alpha: Optional[float] = None,
                 kind: DispersionKind = DispersionKind.SCHRODINGER
                 ) -> SpectralState:
    """Closed form for the degree-0 equation ``u_t - i mu(D) u = lam u_x``:
    mode n is multiplied by ``e^{i t (mu(n) + lam n)}``.

    With ``alpha=None`` the dispersive factor is dropped, i.e. the result is
    the interaction-picture solution ``v(t, x) = phi(x + lam t)``.
    """
    n = np.arange(phi.coeffs.size)
    mu = 0.0 if alpha is None else dispersion_mu(alpha, n, kind)
    return SpectralState(phi.coeffs * np.exp(1j * t * (mu + lam * n)),
                         time=phi.time + t)


# -- mean-zero frame -----------------------------------------------------------

def mean_zero_transform(traj: Trajectory, m0: Optional[complex] = None
                        ) -> Trajectory:
    """Recenter a trajectory around its conserved mean.

    With ``c = sum_l lambda_l m0^l``, mode n >= 1 is multiplied by
    ``e^{-i t c n}`` and m0 is subtracted from mode 0.  The result solves the
    recentered equation whose nonlinearity coefficients are
    ``lambda'_j = sum_{l>=j} lambda_l C(l, j) m0^{l-j}`` (j >= 1): no
    degree-0 term survives, so the new data is mean-zero with no transport.
    """
    spec = traj.spec
    if m0 is None:
        m0 = complex(traj.initial_state.coeffs[0])
    m0 = complex(m0)
    shift = spec.self_coupling(m0)
    if shift.imag > 0:
        warnings.warn(
            "recentering multiplier grows in time (Im of the self-coupling "
            "is positive); the truncated transform stays finite but is "
            "exponentially ill-conditioned", stacklevel=2)
    new_coeffs = {}
    for j in range(1, spec.max_degree + 1):
        lam_j = sum(lam * comb(deg, j) * m0 ** (deg - j)
                    for deg, lam in spec.nonlin_coeffs.items()
                    if deg >= max(j, 1))
        if lam_j != 0:
            new_coeffs[j] = lam_j
    if not new_coeffs:
        raise ValueError("no nonlinear term survives recentering a linear equation")
    w_spec = EquationSpec(alpha=spec.alpha, nonlin_coeffs=new_coeffs,
                          dispersion_kind=spec.dispersion_kind)

    times = traj.grid.node_times()
    mult = np.exp(-1j * shift * traj.modes[:, None, None].astype(float)
                  * times[None, :, :])
    w_vals = traj.values * mult
    w_init = np.array(traj.initial_state.coeffs)
    w_init[0] -= m0
    r0 = np.searchsorted(traj.modes, 0)
    if r0 < traj.modes.size and traj.modes[r0] == 0:
        w_vals[r0] -= m0
    return Trajectory(spec=w_spec, grid=traj.grid, modes=traj.modes,
                      values=w_vals, truncation=traj.truncation,
                      quadrature_tolerance=traj.quadrature_tolerance,
                      initial_state=SpectralState(w_init, traj.initial_state.time),
                      variable="w")


def mean_zero_inverse(w_traj: Trajectory, m0: complex,
                      original_spec: EquationSpec) -> Trajectory:
    """Undo mean_zero_transform; exact inverse multipliers."""
    m0 = complex(m0)
    shift = original_spec.self_coupling(m0)
    times = w_traj.grid.node_times()
    mult = np.exp(1j * shift * w_traj.modes[:, None, None].astype(float)
                  * times[None, :, :])
    u_vals = w_traj.values * mult
    u_init = np.array(w_traj.initial_state.coeffs)
    u_init[0] += m0
    r0 = np.searchsorted(w_traj.modes, 0)
    if r0 < w_traj.modes.size and w_traj.modes[r0] == 0:
        u_vals[r0] += m0
    return Trajectory(spec=original_spec, grid=w_traj.grid, modes=w_traj.modes,
                      values=u_vals, truncation=w_traj.truncation,
                      quadrature_tolerance=w_traj.quadrature_tolerance,
                      initial_state=SpectralState(u_init, w_traj.initial_state.time),
                      variable="u")


# -- weak-formulation residual --------------------------------------------------

@dataclass(frozen=True)
class TimeWindow:
    """Smooth window theta with theta(T) = 0, with an analytic derivative.

    value/derivative accept numpy arrays of times in [0, T].
    """

    name: str
    horizon: float
    value: Callable
    derivative: Callable


def standard_windows(T: float) -> list:
    """Three windows vanishing at T: a flat bump, a quartic, and a cosine."""

    def bump_val(t):
        s = np.atleast_1d(np.asarray(t, dtype=float)) / T
        out = np.zeros_like(s)
        m = s < 1.0
        inside = 1.0 - s[m] ** 2
        out[m] = np.exp(1.0 - 1.0 / inside)
        return out

    def bump_der(t):
        s = np.atleast_1d(np.asarray(t, dtype=float)) / T
        out = np.zeros_like(s)
        m = s < 1.0 - 1e-12
        inside = 1.0 - s[m] ** 2
        out[m] = np.exp(1.0 - 1.0 / inside) * (-2.0 * s[m] / T) / inside**2
        return out

    def quartic_val(t):
        s = np.clip(np.atleast_1d(np.asarray(t, dtype=float)) / T, 0.0, 1.0)
        return (1.0 - s) ** 4

    def quartic_der(t):
        s = np.clip(np.atleast_1d(np.asarray(t, dtype=float)) / T, 0.0, 1.0)
        return -4.0 * (1.0 - s) ** 3 / T

    def cos_val(t):
        s = np.atleast_1d(np.asarray(t, dtype=float)) / T
        return np.cos(0.5 * np.pi * s) ** 2

    def cos_der(t):
        s = np.atleast_1d(np.asarray(t, dtype=float)) / T
        return -(0.5 * np.pi / T) * np.sin(np.pi * s)

    return [
        TimeWindow("bump", T, bump_val, bump_der),
        TimeWindow("quartic", T, quartic_val, quartic_der),
        TimeWindow("cosine", T, cos_val, cos_der),
    ]


def weak_residual(traj: Trajectory, m: int, window: TimeWindow) -> complex:
    """Defect of the distributional formulation against the test function
    ``chi(t, x) = theta(t) e^{-imx}``.

    For a true solution the value vanishes up to quadrature error:

        -int u_m theta' dt - phi_m theta(0) - i mu(m) int u_m theta dt
            = sum_l lambda_l (i m / (l+1)) int (u^{l+1})_m theta dt.

    Returns left minus right.
    """
    if not 0 <= m <= traj.truncation:
        raise ValueError(f"test mode {m} outside truncation {traj.truncation}")
    if abs(window.horizon - traj.horizon) > 1e-12 * max(1.0, traj.horizon):
        raise ValueError("window horizon differs from trajectory horizon")
    spec = traj.spec
    grid = traj.grid
    sch = grid.scheme
    times = grid.node_times()
    widths = grid.widths()

    mu_m = dispersion_mu(spec.alpha, m, spec.dispersion_kind)
    phi_m = complex(traj.initial_state.coeffs[m])
    degs = sorted(spec.nonlin_coeffs)

    int_theta = 0.0 + 0.0j
    int_dtheta = 0.0 + 0.0j
    int_pow = {deg: 0.0 + 0.0j for deg in degs}
    row = traj._row(m)
    for p in range(grid.n_panels):
        wq = 0.5 * widths[p] * sch.weights
        tp = times[p]
        th = window.value(tp)
        dth = window.derivative(tp)
        um = traj.values[row, p, :] if row is not None else np.zeros(grid.q,
                                                                     dtype=complex)
        int_theta += np.sum(wq * th * um)
        int_dtheta += np.sum(wq * dth * um)
        dense = traj.panel_node_values(p, dense=True)[: m + 1]
        for deg in degs:
            if deg == 0:
                pv = um
            else:
                pv = np.empty(grid.q, dtype=complex)
                for i in range(grid.q):
                    acc = dense[:, i]
                    for _ in range(deg):
                        acc = np.convolve(acc, dense[:, i])[: m + 1]
                    pv[i] = acc[m]
            int_pow[deg] += np.sum(wq * th * pv)

    theta0 = complex(window.value(np.array([0.0]))[0])
    lhs = -int_dtheta - phi_m * theta0 - 1j * mu_m * int_theta
    rhs = sum(spec.nonlin_coeffs[deg] * (1j * m / (deg + 1)) * int_pow[deg]
              for deg in degs)
    return complex(lhs - rhs)
