"""Gauge-transformed pipeline for the second-order dispersion (alpha = 2).

At alpha = 2 the normal-form gain from 1/Phi is not enough, so the
derivative is removed from the worst nonlinear term by conjugation instead:
with the periodic weight

    Lambda(t, x) = (1/2i) int_0^x u(t, y)^k dy

the pair ``(u, gu)`` with ``gu = e^{-Lambda} u_x`` satisfies a system whose
nonlinearities carry no derivative, so a plain Duhamel/Picard iteration
converges for small data.  All ingredients (primitive, exponential, point
values at x = 0) are computed in coefficient space; the exponential of a
series with lowest mode >= 1 terminates after M convolution powers and is
therefore exact at the truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .normalform import MaxIterationsError, NonContractionError
from .quadrature import (DEFAULT_POINTS, PanelGrid, RADIANS_PER_PANEL,
                         oscillatory_march)
from .spectral import (EquationSpec, SpectralState, convolve,
                       derivative_coeffs, dispersion_mu, power, sobolev_norm)
from .trajectory import Trajectory, sup_sobolev_diff

__all__ = [
    "GaugeWeight",
    "SecularSlopeError",
    "GaugePicardLog",
    "primitive_from_zero",
    "gauge_lambda",
    "exp_coeffs",
    "gauge_exp",
    "gauge_system_rhs",
    "compatible_gauge_data",
    "gauge_picard_solve",
    "compatibility_defects",
    "conjugation_defect",
]

MEAN_TOL = 1e-12
SLOPE_TOL = 1e-10


class SecularSlopeError(ValueError):
    """A primitive that must be periodic picked up a linear-in-x part."""


@dataclass(frozen=True, eq=False)
class GaugeWeight:
    """An antiderivative split into an affine and a periodic part.

    ``periodic_coeffs`` is normalized so the point value at x = 0 vanishes;
    ``secular_slope`` is the coefficient of x (the mean of the integrand)
    and is zero whenever the integrand is mean-zero.
    """

    periodic_coeffs: np.ndarray
    secular_slope: complex

    def __post_init__(self):
        c = np.array(self.periodic_coeffs, dtype=complex)
        c.flags.writeable = False
        object.__setattr__(self, "periodic_coeffs", c)
        object.__setattr__(self, "secular_slope", complex(self.secular_slope))

    @property
    def truncation(self) -> int:
        return self.periodic_coeffs.size - 1


def _coeffs(a) -> np.ndarray:
    return np.asarray(getattr(a, "coeffs", a), dtype=complex)


def point_value(a) -> complex:
    """Value at x = 0: the plain mode sum (absolutely convergent here)."""
    return complex(np.sum(_coeffs(a)))


def primitive_from_zero(g) -> GaugeWeight:
    """``int_0^x g``: slope ``g(0)`` plus the periodic part ``g(n)/(in)``,
    with the constant chosen so the value at x = 0 is zero."""
    c = _coeffs(g)
    p = np.zeros_like(c)
    n = np.arange(1, c.size)
    p[1:] = c[1:] / (1j * n)
    p[0] = -np.sum(p[1:])
    return GaugeWeight(periodic_coeffs=p, secular_slope=complex(c[0]))


def gauge_lambda(u, k: int) -> GaugeWeight:
    """The gauge weight ``(1/2i) int_0^x u^k``.

    Requires mean-zero ``u^k`` (automatic for mean-zero one-sided u), else
    the primitive would not be periodic.
    """
    cu = _coeffs(u)
    if k < 1:
        raise ValueError("k must be >= 1")
    g = power(cu, k) / 2j
    if abs(g[0]) > MEAN_TOL:
        raise SecularSlopeError(
            f"u^k has mean {g[0]:.3e}; its primitive is not periodic "
            "(u must be mean-zero)")
    return primitive_from_zero(g)


def exp_coeffs(lam) -> np.ndarray:
    """Coefficients of ``e^{lam}`` for a one-sided series.

    The positive-mode part has lowest mode >= 1, so its j-th power starts at
    mode j and the exponential series terminates after M terms: the result
    is exact at the truncation.  The mode-0 part contributes the scalar
    factor ``e^{lam(0)}``.
    """
    c = _coeffs(lam)
    pos = np.array(c)
    pos[0] = 0.0
    out = np.zeros_like(c)
    out[0] = 1.0
    term = out.copy()
    for j in range(1, c.size):
        term = np.convolve(term, pos)[: c.size] / j
        if not np.any(term):
            break
        out += term
    return np.exp(c[0]) * out


def gauge_exp(w: GaugeWeight, c: complex = 1.0) -> np.ndarray:
    """``e^{c Lambda}`` of a periodic gauge weight (zero secular slope)."""
    if abs(w.secular_slope) > SLOPE_TOL:
        raise SecularSlopeError(
            f"secular slope {w.secular_slope:.3e} != 0: the exponential of a "
            "non-periodic weight has no Fourier series")
    return exp_coeffs(c * w.periodic_coeffs)


def gauge_system_rhs(u, gu, k: int) -> tuple:
    """Right-hand sides of the gauge-conjugated system.

    For ``L = d/dt + i d_x^2``:

        L u  = u^k e^L gu,
        L gu = k u^{k-1} e^L gu^2
               - (k/2) [ (u^{k-1} e^L gu)(0)
                         + (k-1) int_0^x u^{k-2} e^{2L} gu^2 ] gu
               + (1/4i) u(0)^{2k} gu,

    where (0) denotes the point value at x = 0 and e^L the gauge
    exponential.  The k-1 terms are absent for k = 1.  The primitive in the
    bracket is tracked with its secular slope; a non-negligible slope aborts
    (it cannot occur for mean-zero one-sided data, where the integrand's
    mean vanishes identically).
    """
    cu, cg = _coeffs(u), _coeffs(gu)
    if cu.size != cg.size:
        raise ValueError("u and gu must share one truncation")
    lam = gauge_lambda(cu, k)
    eL = exp_coeffs(lam.periodic_coeffs)
    f_rhs = convolve(convolve(power(cu, k), eL), cg)

    base = convolve(power(cu, k - 1), eL)
    gu2 = convolve(cg, cg)
    kterm = k * convolve(base, gu2)
    bracket = np.zeros_like(cu)
    bracket[0] = point_value(convolve(base, cg))
    if k >= 2:
        integrand = convolve(convolve(power(cu, k - 2), convolve(eL, eL)), gu2)
        prim = primitive_from_zero(integrand)
        if abs(prim.secular_slope) > SLOPE_TOL:
            raise SecularSlopeError(
                f"integral term has secular slope {prim.secular_slope:.3e}; "
                "refusing to continue with a non-periodic right-hand side")
        bracket = bracket + (k - 1) * prim.periodic_coeffs
    u0 = point_value(cu)
    g_rhs = (kterm - (k / 2) * convolve(bracket, cg)
             + (1 / 4j) * (u0 ** (2 * k)) * cg)
    return f_rhs, g_rhs


def compatible_gauge_data(phi: SpectralState, k: int) -> SpectralState:
    """The twisted-derivative data ``e^{-Lambda(phi)} phi_x`` matching phi."""
    lam = gauge_lambda(phi.coeffs, k)
    psi = convolve(exp_coeffs(-lam.periodic_coeffs), derivative_coeffs(phi.coeffs))
    return SpectralState(psi, time=phi.time)


@dataclass
class GaugePicardLog:
    iterations: list = field(default_factory=list)
    converged: bool = False
    final_residual: float = float("nan")
    phi_h1: float = float("nan")
    psi_h1: float = float("nan")

    def record(self, i: int, diff: float, ratio: Optional[float]):
        self.iterations.append((i, diff, ratio))

    @property
    def ratios(self) -> list:
        return [r for _, _, r in self.iterations if r is not None]

    def write_csv(self, fh, manifest_lines=()):
        for line in manifest_lines:
            fh.write(f"# {line}\n")
        fh.write("iteration,sup_h1_difference,ratio\n")
        for i, d, r in self.iterations:
            fh.write(f"{i},{d!r},{'' if r is None else repr(r)}\n")


def gauge_picard_solve(phi: SpectralState, psi: SpectralState, k: int,
                       T: float, tol: float = 1e-10, max_iter: int = 60,
                       smallness_threshold: float = 0.25,
                       allow_unsafe: bool = False, q: int = DEFAULT_POINTS,
                       radians_per_panel: float = RADIANS_PER_PANEL) -> tuple:
    """Picard iteration on the Duhamel form of the gauge system.

    Starts from the free evolutions of ``(phi, psi)`` and iterates until the
    sup-in-time H^1 increment of both components is below ``tol``.  Returns
    ``(trajectory of u, trajectory of gu, GaugePicardLog)``.

    ``smallness_threshold`` bounds ``|phi|_H1 + |psi|_H1``; it is a
    pragmatic stand-in for the contraction smallness condition.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    M = phi.truncation
    if psi.truncation != M:
        raise ValueError("phi and psi must share one truncation")
    if abs(phi.coeffs[0]) > MEAN_TOL or abs(psi.coeffs[0]) > MEAN_TOL:
        raise ValueError("gauge solver needs mean-zero data")
    log = GaugePicardLog(phi_h1=sobolev_norm(phi, 1.0),
                         psi_h1=sobolev_norm(psi, 1.0))
    if log.phi_h1 + log.psi_h1 > smallness_threshold and not allow_unsafe:
        raise ValueError(
            f"|phi|_H1 + |psi|_H1 = {log.phi_h1 + log.psi_h1:.4g} exceeds the "
            f"smallness threshold {smallness_threshold}; pass "
            "allow_unsafe=True to iterate anyway")

    spec = EquationSpec.pure_power(k, 2.0)
    mu = dispersion_mu(2.0, np.arange(M + 1)).astype(complex)
    grid = PanelGrid.for_frequency(T, 2.0 * float(mu[-1].real) + 1.0, q=q,
                                   radians_per_panel=radians_per_panel)
    times = grid.node_times()
    phi_c = np.asarray(phi.coeffs, dtype=complex)
    psi_c = np.asarray(psi.coeffs, dtype=complex)

    shape = (M + 1, grid.n_panels, grid.q)
    u_vals = np.empty(shape, dtype=complex)
    g_vals = np.empty(shape, dtype=complex)
    for p in range(grid.n_panels):
        E = np.exp(1j * np.outer(mu, times[p]))
        u_vals[:, p, :] = phi_c[:, None] * E
        g_vals[:, p, :] = psi_c[:, None] * E

    prev_diff = None
    bad = 0
    for it in range(1, max_iter + 1):
        f_rhs = np.empty(shape, dtype=complex)
        g_rhs = np.empty(shape, dtype=complex)
        for p in range(grid.n_panels):
            for i in range(grid.q):
                f_rhs[:, p, i], g_rhs[:, p, i] = gauge_system_rhs(
                    u_vals[:, p, i], g_vals[:, p, i], k)
        new_u = oscillatory_march(grid, mu, f_rhs, phi_c)
        new_g = oscillatory_march(grid, mu, g_rhs, psi_c)
        diff = max(sup_sobolev_diff(new_u, u_vals),
                   sup_sobolev_diff(new_g, g_vals))
        ratio = None if prev_diff in (None, 0.0) else diff / prev_diff
        log.record(it, diff, ratio)
        u_vals, g_vals = new_u, new_g
        if diff <= tol:
            log.converged = True
            break
        if ratio is not None and ratio >= 1.0:
            bad += 1
            if bad >= 2 and diff > 10 * tol:
                raise NonContractionError(
                    f"gauge iterates stopped contracting (ratio {ratio:.3f}); "
                    f"|phi|_H1 + |psi|_H1 = {log.phi_h1 + log.psi_h1:.4g}")
        else:
            bad = 0
        prev_diff = diff
    if not log.converged:
        raise MaxIterationsError(
            f"gauge iteration: no convergence after {max_iter} iterations; "
            f"last increment {log.iterations[-1][1]:.3e}")
    log.final_residual = log.iterations[-1][1]

    modes = np.arange(M + 1)
    traj_u = Trajectory(spec=spec, grid=grid, modes=modes, values=u_vals,
                        truncation=M, quadrature_tolerance=tol,
                        initial_state=phi, variable="u")
    traj_g = Trajectory(spec=spec, grid=grid, modes=modes, values=g_vals,
                        truncation=M, quadrature_tolerance=tol,
                        initial_state=psi, variable="gu")
    return traj_u, traj_g, log


def compatibility_defects(traj_u: Trajectory, traj_gu: Trajectory, k: int,
                          ts=None) -> np.ndarray:
    """H^0 norm of ``gu - e^{-Lambda(u)} u_x`` at each sample time.

    Small values certify that the pair stayed on the gauge relation it was
    initialized with.
    """
    if ts is None:
        ts = traj_u.sample_times
    out = np.empty(len(ts))
    for i, t in enumerate(ts):
        cu = traj_u.coeffs_at(t)
        cg = traj_gu.coeffs_at(t)
        lam = gauge_lambda(cu, k)
        target = convolve(exp_coeffs(-lam.periodic_coeffs),
                          derivative_coeffs(cu))
        out[i] = sobolev_norm(cg - target, 0.0)
    return out


def conjugation_defect(f, f_t, lam, lam_t) -> float:
    """Max-mode defect of the conjugation identity

        e^L Op(e^{-L} f) = Op f + (-Op L + i (L_x)^2) f - 2i L_x f_x,

    where ``Op = d/dt + i d_x^2`` and all products are truncated one-sided
    convolutions.  The inputs are coefficient vectors of f, df/dt, Lambda,
    dLambda/dt at one instant; the identity is exact in truncated arithmetic
    so the returned value is pure round-off.
    """
    cf, cft = _coeffs(f), _coeffs(f_t)
    cl, clt = _coeffs(lam), _coeffs(lam_t)
    if not (cf.size == cft.size == cl.size == clt.size):
        raise ValueError("all inputs must share one truncation")
    n = np.arange(cf.size, dtype=float)
    n2 = n * n

    eL = exp_coeffs(cl)
    emL = exp_coeffs(-cl)
    g = convolve(emL, cf)
    # commutative algebra: d/dt e^{-L} = -L_t e^{-L}
    g_t = convolve(emL, cft - convolve(clt, cf))
    op_g = g_t - 1j * n2 * g
    lhs = convolve(eL, op_g)

    op_f = cft - 1j * n2 * cf
    op_l = clt - 1j * n2 * cl
    dlam = 1j * n * cl
    rhs = (op_f + convolve(-op_l + 1j * convolve(dlam, dlam), cf)
           - 2j * convolve(dlam, 1j * n * cf))
    return float(np.max(np.abs(lhs - rhs)))
