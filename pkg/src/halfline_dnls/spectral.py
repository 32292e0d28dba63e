"""One-sided Fourier coefficient arithmetic on the circle.

Every function here manipulates truncated coefficient vectors ``c[0..M]``
representing ``f(x) = sum_{n=0}^{M} c[n] e^{inx}``.  Because all frequencies
are nonnegative, products are lower triangular in frequency: entry ``n`` of a
convolution depends only on entries ``<= n`` of the factors, so truncated
results agree exactly with the untruncated ones on the retained modes.  That
exactness is the backbone of every consistency check in this package; there
is deliberately no collocation grid and no FFT.

Convention: the analysis integral carries a ``1/2pi`` factor, so the
coefficient vector of a constant ``c`` is ``c * delta_0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

__all__ = [
    "DispersionKind",
    "EquationSpec",
    "SpectralState",
    "TruncationMismatchError",
    "convolve",
    "power",
    "sobolev_norm",
    "derivative_coeffs",
    "dispersion_mu",
    "dispersion_symbol",
    "dispersion_apply",
]


class TruncationMismatchError(ValueError):
    """Raised when two coefficient vectors of different truncation meet."""


class DispersionKind(Enum):
    SCHRODINGER = "schrodinger"
    AIRY_TYPE = "airy_type"


def _as_coeffs(a) -> np.ndarray:
    c = np.asarray(getattr(a, "coeffs", a), dtype=complex)
    if c.ndim != 1:
        raise ValueError(f"coefficient vector must be 1-D, got shape {c.shape}")
    return c


@dataclass(frozen=True, eq=False)
class SpectralState:
    """A truncated one-sided spectrum ``u(x) = sum_{n=0}^{M} coeffs[n] e^{inx}``
    tagged with a time stamp.

    Immutable; the coefficient array is made read-only at construction.
    """

    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("coeffs must be a 1-D vector with truncation M >= 1")
        if not np.all(np.isfinite(c.view(float))):
            raise ValueError("coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "time", float(self.time))

    @property
    def truncation(self) -> int:
        return self.coeffs.size - 1

    @classmethod
    def from_modes(cls, modes: Mapping[int, complex], truncation: int,
                   time: float = 0.0) -> "SpectralState":
        c = np.zeros(truncation + 1, dtype=complex)
        for n, a in modes.items():
            if not 0 <= n <= truncation:
                raise ValueError(f"mode {n} outside [0, {truncation}]")
            c[n] = a
        return cls(c, time)

    def point_value(self, x: float = 0.0) -> complex:
        """Evaluate the trigonometric polynomial at ``x`` (plain mode sum)."""
        n = np.arange(self.coeffs.size)
        return complex(np.sum(self.coeffs * np.exp(1j * n * x)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralState":
        coeffs = np.array([complex(re, im) for re, im in d["coeffs"]])
        return cls(coeffs, float(d.get("time", 0.0)))

    @classmethod
    def from_json(cls, s: str) -> "SpectralState":
        return cls.from_dict(json.loads(s))


def _validate_nonlin(coeffs: Mapping[int, complex]) -> dict:
    out = {}
    for deg, lam in coeffs.items():
        deg = int(deg)
        if deg < 0:
            raise ValueError("nonlinearity degrees must be >= 0")
        lam = complex(lam)
        if lam != 0:
            out[deg] = lam
    if not out:
        raise ValueError("at least one nonlinearity coefficient must be nonzero")
    return out


@dataclass(frozen=True)
class EquationSpec:
    """Which equation is being solved.

    ``u_t - i mu(D) u = (sum_l lambda_l u^l) u_x`` where ``mu`` is the
    dispersion symbol and ``nonlin_coeffs`` maps degree ``l`` to ``lambda_l``.
    Degree 0 is allowed and denotes the constant-coefficient transport term
    ``lambda_0 u_x`` (the linear equation is the special case where only
    degree 0 is present).

    Dispersion symbols: SCHRODINGER gives ``mu(n) = |n|^alpha``, AIRY_TYPE
    gives ``mu(n) = n |n|^(alpha-1)``.  On one-sided spectra (n >= 0) the two
    coincide with ``n^alpha``, which is computed exactly in integer
    arithmetic when ``alpha`` is an integer.
    """

    alpha: float
    nonlin_coeffs: Mapping[int, complex]
    dispersion_kind: DispersionKind = DispersionKind.SCHRODINGER

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 1:
            raise ValueError("alpha must be a finite real >= 1")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "nonlin_coeffs", _validate_nonlin(self.nonlin_coeffs))

    @classmethod
    def pure_power(cls, k: int, alpha: float,
                   kind: DispersionKind = DispersionKind.SCHRODINGER,
                   lam: complex = 1.0) -> "EquationSpec":
        """The single-term nonlinearity ``lam * u^k u_x``."""
        if k < 0:
            raise ValueError("k must be >= 0")
        return cls(alpha=alpha, nonlin_coeffs={k: lam}, dispersion_kind=kind)

    @property
    def max_degree(self) -> int:
        return max(self.nonlin_coeffs)

    def self_coupling(self, c: complex) -> complex:
        """``sum_l lambda_l c^l``: coefficient of the self-interaction of
        mode n induced by a constant background ``c`` (mode-0 amplitude)."""
        return sum(lam * c**deg for deg, lam in self.nonlin_coeffs.items())

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "dispersion_kind": self.dispersion_kind.value,
            "nonlin_coeffs": {
                str(deg): [lam.real, lam.imag]
                for deg, lam in sorted(self.nonlin_coeffs.items())
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EquationSpec":
        return cls(
            alpha=float(d["alpha"]),
            nonlin_coeffs={int(k): complex(v[0], v[1])
                           for k, v in d["nonlin_coeffs"].items()},
            dispersion_kind=DispersionKind(d.get("dispersion_kind", "schrodinger")),
        )


def _check_same_truncation(a: np.ndarray, b: np.ndarray):
    if a.size != b.size:
        raise TruncationMismatchError(
            f"truncations differ: {a.size - 1} vs {b.size - 1}")


def convolve(a, b) -> np.ndarray:
    """Coefficient product ``(a*b)(n) = sum_{m=0}^{n} a(m) b(n-m)``.

    Both inputs must share one truncation M; entries ``n <= M`` of the result
    are exact because no discarded mode can reach them.
    """
    ca, cb = _as_coeffs(a), _as_coeffs(b)
    _check_same_truncation(ca, cb)
    return np.convolve(ca, cb)[: ca.size]


def power(a, j: int) -> np.ndarray:
    """j-fold coefficient product; ``j = 0`` returns the identity delta_0."""
    c = _as_coeffs(a)
    if j < 0:
        raise ValueError("power exponent must be >= 0")
    out = np.zeros_like(c)
    out[0] = 1.0
    base = c
    # binary powering; each convolve is exact on the retained modes
    e = j
    while e:
        if e & 1:
            out = np.convolve(out, base)[: c.size]
        e >>= 1
        if e:
            base = np.convolve(base, base)[: c.size]
    return out


def sobolev_norm(u, s: float) -> float:
    """``( sum <n>^{2s} |u(n)|^2 )^{1/2}`` with ``<n> = sqrt(1 + n^2)``.

    At ``s = 0`` this is the L^2 norm (Parseval).
    """
    c = _as_coeffs(u)
    n = np.arange(c.size, dtype=float)
    w = (1.0 + n * n) ** float(s)
    return float(np.sqrt(np.sum(w * (c.real**2 + c.imag**2))))


def derivative_coeffs(u) -> np.ndarray:
    """Coefficients of the spatial derivative: ``(u_x)(n) = i n u(n)``."""
    c = _as_coeffs(u)
    return 1j * np.arange(c.size) * c


def dispersion_mu(alpha: float, n, kind: DispersionKind = DispersionKind.SCHRODINGER):
    """``mu(n)`` for nonnegative integer frequencies ``n``.

    Integer ``alpha`` is evaluated in exact integer arithmetic before
    conversion, so SCHRODINGER and AIRY_TYPE agree bit for bit there.
    """
    n_arr = np.atleast_1d(np.asarray(n))
    if np.any(n_arr < 0):
        raise ValueError("one-sided states have no negative frequencies")
    if float(alpha).is_integer():
        a = int(alpha)
        if kind is DispersionKind.SCHRODINGER:
            vals = [float(abs(int(m)) ** a) for m in n_arr]
        else:
            vals = [float(int(m) * abs(int(m)) ** (a - 1)) for m in n_arr]
        out = np.array(vals)
    else:
        nf = n_arr.astype(float)
        if kind is DispersionKind.SCHRODINGER:
            out = np.abs(nf) ** float(alpha)
        else:
            out = nf * np.abs(nf) ** (float(alpha) - 1.0)
    return out if np.ndim(n) else float(out[0])


def dispersion_symbol(spec: EquationSpec, n):
    """``mu(n)`` of the equation's dispersion on nonnegative frequencies."""
    return dispersion_mu(spec.alpha, n, spec.dispersion_kind)


def dispersion_apply(u: SpectralState, spec: EquationSpec, t: float) -> SpectralState:
    """Free evolution for a duration ``t``: multiply mode n by ``e^{i t mu(n)}``."""
    n = np.arange(u.coeffs.size)
    mu = dispersion_symbol(spec, n)
    return SpectralState(u.coeffs * np.exp(1j * t * mu), time=u.time + t)
