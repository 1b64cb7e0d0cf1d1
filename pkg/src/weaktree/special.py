"""Gamma and modified Bessel functions, the weak-coupling constants and the
half-line Green functions.

All Bessel quantities are real: ``I_nu`` and ``K_nu`` of real order and
positive argument.  The Green functions use the exponentially scaled
``ive``/``kve`` so that products like ``I_nu(k t) K_nu(k t')`` stay finite for
large ``k t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .errors import NearSingularError

__all__ = [
    "Order",
    "SpectralConstants",
    "gamma_fn",
    "bessel_ik",
    "bessel_ik_scaled",
    "spectral_constants",
    "green_dirichlet",
    "green_robin",
    "robin_ratio",
]


@dataclass(frozen=True)
class Order:
    """Bessel order ``nu = (2-d)/2`` together with ``alpha = d - 1``."""

    nu: float
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ValueError(f"order nu={self.nu} outside (0, 1]")

    @classmethod
    def from_dimension(cls, d: float) -> "Order":
        if not 0.0 <= d < 2.0:
            raise ValueError("need 0 <= d < 2")
        return cls((2.0 - d) / 2.0, d - 1.0)

    @property
    def d(self) -> float:
        return 2.0 - 2.0 * self.nu


def gamma_fn(x):
    """Gamma function for ``x > 0``."""
    if np.ndim(x) == 0:
        if not x > 0:
            raise ValueError("gamma_fn needs x > 0")
        return math.gamma(float(x))
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("gamma_fn needs x > 0")
    return sp.gamma(x)


def _check_args(nu, x):
    if np.any(np.asarray(x) <= 0):
        raise ValueError("Bessel argument must be positive")
    if np.any(np.abs(np.asarray(nu)) > 1.0 + 1e-15):
        raise ValueError("order must lie in [-1, 1]")


def bessel_ik(nu, x):
    """``(I_nu(x), K_nu(x))`` for ``x > 0`` and ``|nu| <= 1``.

    Raises ``OverflowError`` when ``I_nu`` overflows or ``K_nu`` underflows;
    use :func:`bessel_ik_scaled` there.
    """
    _check_args(nu, x)
    i = sp.iv(nu, x)
    k = sp.kv(nu, x)
    if np.any(~np.isfinite(i)) or np.any(k == 0.0):
        raise OverflowError("argument beyond the unscaled exponential range")
    return i, k


def bessel_ik_scaled(nu, x):
    """``(exp(-x) I_nu(x), exp(x) K_nu(x))``."""
    _check_args(nu, x)
    return sp.ive(nu, x), sp.kve(nu, x)


@dataclass(frozen=True)
class SpectralConstants:
    """Weak-coupling constants for a given dimension.

    ``K_tilde`` bounds Dirichlet counts, ``C`` multiplies the weak-coupling
    law ``E^nu ~ C lambda int W (1+t)^(d-1)``, ``C_M`` is the prefactor of the
    zero-energy kernel ``M(0)``.
    """

    d: float
    nu: float
    K_tilde: float
    C: float
    C_M: float
    K_tilde_reflection: float
    C_M_reflection: float


def spectral_constants(d: float) -> SpectralConstants:
    """``K_tilde(d)``, ``C(nu)`` and ``C_M(nu)`` with reflection-formula checks."""
    if not 1.0 <= d < 2.0:
        raise ValueError("constants are defined for 1 <= d < 2")
    if d > 2.0 - 1e-6:
        raise NearSingularError(f"d={d} too close to 2: constants diverge like 1/(2-d)")
    nu = (2.0 - d) / 2.0
    s = math.sin(nu * math.pi)
    g_minus = gamma_fn(1.0 - nu)
    g_plus = gamma_fn(1.0 + nu)
    k_tilde = math.pi / (2.0 * s * g_minus * g_plus)
    c = math.pi * 2.0 ** (2.0 * nu - 1.0) / (g_minus**2 * s)
    c_m = -k_tilde
    k_ref = 1.0 / (2.0 - d)
    c_m_ref = -1.0 / (2.0 * nu)
    if abs(k_tilde - k_ref) > 1e-12 * k_ref or abs(c_m - c_m_ref) > 1e-12 * abs(c_m_ref):
        raise ArithmeticError("reflection identity violated; gamma evaluation is off")
    return SpectralConstants(d, nu, k_tilde, c, c_m, k_ref, c_m_ref)


def green_dirichlet(t, tp, kappa: float, nu: float):
    """Dirichlet resolvent kernel ``sqrt(t t') I_nu(k t<) K_nu(k t>)``.

    Kernel of ``(-d^2/dt^2 + (nu^2 - 1/4)/t^2 + kappa^2)^-1`` on the half-line
    with the regular boundary behavior at 0.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    t = np.asarray(t, dtype=float)
    tp = np.asarray(tp, dtype=float)
    if np.any(t <= 0) or np.any(tp <= 0):
        raise ValueError("t and t' must be positive")
    lo = np.minimum(t, tp)
    hi = np.maximum(t, tp)
    i_s, _ = bessel_ik_scaled(nu, kappa * lo)
    _, k_s = bessel_ik_scaled(nu, kappa * hi)
    return np.sqrt(t * tp) * i_s * k_s * np.exp(kappa * (lo - hi))


def robin_ratio(kappa: float, nu: float) -> float:
    """``R(kappa) = I_{nu-1}(kappa) / K_{1-nu}(kappa)``.

    ``R`` fixes the multiple of ``K_nu`` added to ``I_nu`` so that the left
    solution meets the boundary condition ``phi'(0) = ((d-1)/2) phi(0)``.
    """
    i_s, k_s = bessel_ik_scaled(1.0 - nu, kappa)
    return 2.0 / math.pi * math.sin(nu * math.pi) + i_s / k_s * math.exp(2.0 * kappa)


def green_robin(t, tp, kappa: float, d: float):
    """Resolvent kernel of ``B_0 + kappa^2`` on ``[0, inf)``.

    ``B_0 = -d^2/dt^2 + (d-1)(d-3)/(4(1+t)^2)`` with ``phi'(0) = ((d-1)/2) phi(0)``.
    With ``s = 1 + t``::

        G = sqrt(s s') [ I_nu(k s<) K_nu(k s>) + R(k) K_nu(k s) K_nu(k s') ]

    normalized so that the derivative jumps by ``-1`` across the diagonal.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if not 1.0 <= d < 2.0:
        raise ValueError("green_robin needs 1 <= d < 2")
    nu = (2.0 - d) / 2.0
    t = np.asarray(t, dtype=float)
    tp = np.asarray(tp, dtype=float)
    if np.any(t < 0) or np.any(tp < 0):
        raise ValueError("t and t' must be nonnegative")
    s = 1.0 + t
    sp_ = 1.0 + tp
    return _green_robin_s(s, sp_, kappa, nu)


def _green_robin_s(s, sp_, kappa, nu):
    lo = np.minimum(s, sp_)
    hi = np.maximum(s, sp_)
    i_lo, k_lo = bessel_ik_scaled(nu, kappa * lo)
    _, k_hi = bessel_ik_scaled(nu, kappa * hi)
    i1, k1 = bessel_ik_scaled(1.0 - nu, kappa)
    direct = i_lo * k_hi * np.exp(kappa * (lo - hi))
    # R K K split into the sin term and the I/K ratio term, each scaled
    sin_term = 2.0 / math.pi * math.sin(nu * math.pi) * np.exp(-kappa * (s + sp_))
    ratio_term = (i1 / k1) * np.exp(-kappa * (s + sp_ - 2.0))
    reflected = (sin_term + ratio_term) * k_lo * k_hi
    return np.sqrt(s * sp_) * (direct + reflected)
