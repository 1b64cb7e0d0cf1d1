"""Birman-Schwinger kernels of the transformed channel-0 operator and the
counting bounds built on them.

The reference operator is

    B_0 = -d^2/dt^2 + (d-1)(d-3) / (4 (1+t)^2),   phi'(0) = ((d-1)/2) phi(0),

on ``L^2(0, inf)``; it is unitarily equivalent to the channel with weight
``(1+t)^(d-1)`` and a free root.  For a potential ``W`` the kernel

    K(t, t', kappa) = |W(t)|^(1/2) G(t, t', kappa) W(t')^(1/2)

(with ``f^(1/2) = sign(f) |f|^(1/2)``) splits as ``L + M``, where ``L`` is the
rank-one part of size ``kappa^(-2 nu)`` and ``M`` stays bounded as
``kappa -> 0``.  ``-kappa^2`` is an eigenvalue of ``B_0 + lambda W`` exactly
when ``lambda K`` has eigenvalue ``-1``, which for small ``lambda`` reduces
to the scalar secular equation

    lambda C(nu) kappa^(-2 nu) <psi, (I + lambda M(kappa))^-1 phi> = -1.

Kernels are discretized by Nystrom's method on Gauss-Legendre panels and
symmetrized with the square roots of the weights, so operator norms and
Hilbert-Schmidt norms are matrix norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import (
    InconclusiveError,
    NoRootError,
    NormConditionError,
    QuadratureUnderresolvedError,
)
from .halfline import Channel, PowerWeight
from .potentials import moment, weighted_integral
from .special import bessel_ik_scaled, spectral_constants
from .tree import RegularTree, power_lower_constant

__all__ = [
    "Quadrature",
    "BSKernelSet",
    "WeakSolution",
    "CriticalSolution",
    "bs_quadrature",
    "build_bs_kernels",
    "resolve_quadrature",
    "secular_function",
    "solve_weak_eigenvalue",
    "critical_case_eigenvalue",
    "critical_double_integral",
    "bargmann_bound",
    "cor1_bound",
    "channel_threshold",
    "hs_convergence",
    "bs_count",
    "b0_channel",
]


@dataclass(frozen=True, eq=False)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray
    panel: float
    order: int
    T: float

    @property
    def size(self) -> int:
        return len(self.nodes)


def bs_quadrature(W, d: float, panel: float = 0.25, order: int = 8, T: Optional[float] = None):
    """Gauss-Legendre panels on ``[0, T]`` aligned with the pieces of ``W``.

    By default ``T`` is where ``|W|`` has dropped below ``1e-16`` of its
    bound, far enough that the omitted part of ``int (1+t)^(1+2nu) |W|`` is
    negligible for decaying ``W``.
    """
    if T is None:
        T = W.support_end(1e-16)
    if not T > 0:
        raise ValueError("W has empty support")
    cuts = sorted({0.0, T} | {b for b in W.breakpoints(0.0, T)})
    x0, w0 = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((b - a) / panel - 1e-9)))
        edges = np.linspace(a, b, n + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            nodes.append(lo + half * (x0 + 1.0))
            weights.append(half * w0)
    return Quadrature(np.concatenate(nodes), np.concatenate(weights), panel, order, T)


def _refined(W, quad: Quadrature, d: float) -> Quadrature:
    return bs_quadrature(W, d, quad.panel / 2.0, quad.order, quad.T)


@dataclass(eq=False)
class BSKernelSet:
    """Symmetrized Nystrom matrices of ``K``, ``L``, ``M = K - L`` and ``M(0)``.

    ``phi`` and ``psi`` are the unweighted rank-one factors
    ``|W|^(1/2) (1+t)^(1/2-nu)`` and ``W^(1/2) (1+t)^(1/2-nu)``; ``L`` equals
    ``C kappa^(-2 nu) phi_hat psi_hat^T`` with the weighted versions.
    """

    quad: Quadrature
    kappa: float
    nu: float
    d: float
    K: np.ndarray
    L: np.ndarray
    M: np.ndarray
    M0: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    phi_hat: np.ndarray
    psi_hat: np.ndarray
    C: float
    C_M: float

    @property
    def L_factor(self) -> float:
        return self.C * self.kappa ** (-2.0 * self.nu)

    def hs_norm(self, which: str = "K") -> float:
        return float(np.linalg.norm(getattr(self, which)))


def _root_factors(W, quad: Quadrature):
    wv = np.asarray(W(quad.nodes), dtype=float)
    a = np.sqrt(np.abs(wv))
    b = np.sign(wv) * a
    sw = np.sqrt(quad.weights)
    return a, b, sw


def _green_matrix(s, kappa, nu):
    """``G`` on sorted nodes ``s = 1 + t`` from O(N) Bessel evaluations."""
    i_s, k_s = bessel_ik_scaled(nu, kappa * s)
    i1, k1 = bessel_ik_scaled(1.0 - nu, kappa)
    diff = s[:, None] - s[None, :]
    upper = np.outer(i_s, k_s) * np.exp(-kappa * np.abs(diff))
    direct = np.triu(upper) + np.triu(upper, 1).T
    e1 = k_s * np.exp(-kappa * s)
    e2 = k_s * np.exp(-kappa * (s - 1.0))
    reflected = 2.0 / math.pi * math.sin(nu * math.pi) * np.outer(e1, e1) + (i1 / k1) * np.outer(e2, e2)
    return np.sqrt(np.outer(s, s)) * (direct + reflected)


def _m0_matrix(s, nu, c_m):
    ls = np.log(s)
    core = c_m * np.sqrt(np.outer(s, s)) * np.exp(nu * np.abs(ls[:, None] - ls[None, :]))
    if abs(nu - 0.5) < 1e-12:
        # at nu = 1/2 the I/K ratio term of G stays finite as kappa -> 0
        core = core + 1.0
    return core


def build_bs_kernels(
    W, kappa: float, d: float, quad: Optional[Quadrature] = None, *, check: bool = False,
    tol: float = 1e-6,
) -> BSKernelSet:
    """Discretized kernels at ``kappa``.

    With ``check`` the Hilbert-Schmidt norm of ``K`` is recomputed on the
    doubled quadrature and ``QuadratureUnderresolvedError`` is raised when
    the relative change exceeds ``tol``.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    consts = spectral_constants(d)
    nu = consts.nu
    if quad is None:
        quad = bs_quadrature(W, d)
    s = 1.0 + quad.nodes
    a, b, sw = _root_factors(W, quad)
    G = _green_matrix(s, kappa, nu)
    left = sw * a
    right = sw * b
    K = left[:, None] * G * right[None, :]
    pw = s ** (0.5 - nu)
    phi, psi = a * pw, b * pw
    phi_hat, psi_hat = sw * phi, sw * psi
    L = consts.C * kappa ** (-2.0 * nu) * np.outer(phi_hat, psi_hat)
    M = K - L
    M0 = left[:, None] * _m0_matrix(s, nu, consts.C_M) * right[None, :]
    ks = BSKernelSet(quad, kappa, nu, d, K, L, M, M0, phi, psi, phi_hat, psi_hat, consts.C, consts.C_M)
    if check:
        fine = build_bs_kernels(W, kappa, d, _refined(W, quad, d))
        n1, n2 = ks.hs_norm("K"), fine.hs_norm("K")
        if abs(n1 - n2) > tol * max(n2, 1e-300):
            raise QuadratureUnderresolvedError(
                f"||K||_HS changes by {abs(n1 - n2) / n2:.2e} when the nodes are doubled"
            )
    return ks


def resolve_quadrature(W, d: float, kappa: float, tol: float = 1e-6, max_nodes: int = 2000):
    """Halve the panel width until ``||K(kappa)||_HS`` is stable to ``tol``."""
    quad = bs_quadrature(W, d)
    prev = build_bs_kernels(W, kappa, d, quad).hs_norm("K")
    while True:
        fine = _refined(W, quad, d)
        if fine.size > max_nodes:
            raise QuadratureUnderresolvedError(
                f"||K||_HS not stable to {tol:g} with at most {max_nodes} nodes"
            )
        cur = build_bs_kernels(W, kappa, d, fine).hs_norm("K")
        if abs(cur - prev) <= tol * max(cur, 1e-300):
            return fine
        quad, prev = fine, cur


def secular_function(W, lam: float, kappa: float, d: float, quad: Quadrature, check_norm=True):
    """``lambda C kappa^(-2 nu) <psi, (I + lambda M)^-1 phi>`` and ``||M||_2``."""
    ks = build_bs_kernels(W, kappa, d, quad)
    n = len(ks.phi_hat)
    norm = math.nan
    if check_norm:
        hs = float(np.linalg.norm(ks.M))
        norm = hs if abs(lam) * hs < 1.0 else float(np.linalg.norm(ks.M, 2))
        if abs(lam) * norm >= 1.0:
            raise NormConditionError(f"lambda ||M(kappa)|| = {abs(lam) * norm:.3g} >= 1 at kappa={kappa:g}")
    y = np.linalg.solve(np.eye(n) + lam * ks.M, ks.phi_hat)
    return lam * ks.L_factor * float(ks.psi_hat @ y), norm


@dataclass
class WeakSolution:
    kappa: float
    E: float
    E_first_order: float
    mass: float
    history: list = field(default_factory=list)
    monotone: bool = True
    max_norm: float = math.nan

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "E": self.E,
            "E_first_order": self.E_first_order,
            "attractive_mass": self.mass,
            "trace_monotone": self.monotone,
            "lambda_norm_M_max": self.max_norm,
            "evaluations": len(self.history),
        }


def _attractive_mass(W, d):
    return moment(W, d - 1.0, "power")


def _solve_secular(W, lam, d, quad, kappa0, xtol):
    history = []
    norms = []

    def f(logk):
        k = math.exp(logk)
        val, norm = secular_function(W, lam, k, d, quad)
        history.append((k, val))
        norms.append(abs(lam) * norm)
        return val + 1.0

    lo = hi = math.log(kappa0)
    flo = f(lo)
    fhi = flo
    for _ in range(200):
        if flo < 0:
            break
        lo -= math.log(2.0)
        flo = f(lo)
    else:
        raise NoRootError("secular function never drops below -1 as kappa decreases")
    for _ in range(200):
        if fhi > 0:
            break
        hi += math.log(2.0)
        fhi = f(hi)
    else:
        raise NoRootError("secular function never rises above -1 as kappa grows")
    root = optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    pts = sorted(history)
    vals = [v for _, v in pts]
    monotone = all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))
    return math.exp(root), pts, monotone, max(norms) if norms else math.nan


def solve_weak_eigenvalue(
    W, lam: float, d: float, quad: Optional[Quadrature] = None, xtol: float = 1e-12
) -> WeakSolution:
    """Root ``kappa(lambda)`` of the secular equation and ``E = -kappa^2``.

    Needs ``lambda int W (1+t)^(d-1) dt < 0``; otherwise ``NoRootError``.
    ``NormConditionError`` is raised if ``lambda ||M(kappa)|| >= 1`` anywhere
    the root finder looks.
    """
    consts = spectral_constants(d)
    nu = consts.nu
    mass = _attractive_mass(W, d)
    if not lam * mass < 0:
        raise NoRootError("no weak-coupling root: lambda * int W (1+t)^(d-1) dt is not negative")
    if quad is None:
        quad = bs_quadrature(W, d)
    first = consts.C * abs(lam * mass)
    kappa0 = first ** (1.0 / (2.0 * nu))
    kappa, hist, mono, norm = _solve_secular(W, lam, d, quad, kappa0, xtol)
    return WeakSolution(kappa, -kappa * kappa, -(first ** (1.0 / nu)), mass, hist, mono, norm)


def critical_double_integral(W, d: float) -> float:
    """``W_0 = int int W(t) W(t') (s s')^(1-nu) (s>/s<)^nu dt dt'`` with ``s = 1+t``.

    Uses ``(s s')^(1-nu) (s>/s<)^nu = s> s<^(1-2 nu)`` and integrates the
    inner variable over ``t' > t`` only.
    """
    nu = (2.0 - d) / 2.0
    end = W.support_end()
    bps = W.breakpoints(0.0, end)

    def inner(t):
        if t >= end:
            return 0.0
        cuts = [b for b in bps if b > t]
        v, _ = weighted_integral(lambda u: float(W(u)) * (1.0 + u), cuts, t, end, decays=W.decays)
        return v

    def outer(t):
        w = float(W(t))
        if w == 0.0:
            return 0.0
        return w * (1.0 + t) ** (1.0 - 2.0 * nu) * inner(t)

    val, _ = weighted_integral(outer, bps, 0.0, end, decays=W.decays, epsabs=1e-12, epsrel=1e-10)
    return 2.0 * val


@dataclass
class CriticalSolution:
    W0: float
    E_predicted: float
    solution: Optional[WeakSolution]


def critical_case_eigenvalue(
    W, lam: float, d: float, quad: Optional[Quadrature] = None, mass_tol: float = 1e-8,
    solve: bool = True,
) -> CriticalSolution:
    """Second-order prediction when ``int W (1+t)^(d-1) dt = 0``.

    ``E^nu ~ -C C_M lambda^2 W_0``, valid when ``W_0 < 0``; raises
    ``InconclusiveError`` when ``W_0 >= 0``.
    """
    consts = spectral_constants(d)
    nu = consts.nu
    mass = _attractive_mass(W, d)
    scale = moment(W, d - 1.0, "power", absolute=True)
    if abs(mass) > mass_tol * max(scale, 1e-300):
        raise ValueError(f"not a critical potential: int W (1+t)^(d-1) = {mass:.3e}")
    W0 = critical_double_integral(W, d)
    if W0 >= 0:
        raise InconclusiveError(f"W_0 = {W0:.3e} >= 0; no weak-coupling eigenvalue predicted")
    if lam == 0:
        return CriticalSolution(W0, 0.0, None)
    k2nu = consts.C * consts.C_M * W0 * lam * lam
    pred = -(k2nu ** (1.0 / nu))
    sol = None
    if solve:
        if quad is None:
            quad = bs_quadrature(W, d)
        kappa, hist, mono, norm = _solve_secular(W, lam, d, quad, k2nu ** (1.0 / (2 * nu)), 1e-12)
        sol = WeakSolution(kappa, -kappa * kappa, pred, mass, hist, mono, norm)
    return CriticalSolution(W0, pred, sol)


def bargmann_bound(V, d: float, lam: float = 1.0) -> float:
    """``lambda K(d) int_0^inf t |V(t)| dt``: bounds the Dirichlet count."""
    kt = spectral_constants(d).K_tilde
    return lam * kt * moment(V, 1.0, "t_power", absolute=True)


def cor1_bound(V, tree: RegularTree, d: float, lam: float):
    """``1 + lambda (K(d)/a) int |V| g_0 t^(2-d) dt`` and the constant ``a`` used.

    ``a`` is the largest constant with ``a t^(d-1) <= g_0(t)`` for ``t > 0``.
    """
    kt = spectral_constants(d).K_tilde
    a = power_lower_constant(tree, d)
    integral = moment(V, 0.0, "g0_t2d", tree=tree, d=d, absolute=True)
    return 1.0 + lam * kt / a * integral, a


def channel_threshold(tree: RegularTree, V, d: float, k: int) -> float:
    """``lambda_c = 1 / (K(d) int_0^inf s |V_k^-(s + t_k)| ds)`` for channel ``k >= 1``.

    Below ``lambda_c`` the trace bound certifies that channel ``k`` is empty.
    Only the attractive part of ``V_k^-`` counts; ``inf`` when it vanishes.
    """
    from .decomposition import channel_bound

    if k < 1:
        raise ValueError("thresholds are defined for k >= 1")
    b = channel_bound(tree, V, 1.0, d, k)
    return math.inf if b == 0 else 1.0 / b


@dataclass
class HSReport:
    kappas: list
    norms: list
    m0_norm: float
    nodes: int

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.norms, self.norms[1:]))


def hs_convergence(W, d: float, kappas: Sequence[float], quad: Optional[Quadrature] = None):
    """``||M(kappa) - M(0)||_HS`` for each ``kappa`` and ``||M(0)||_HS``."""
    if quad is None:
        quad = bs_quadrature(W, d)
    norms = []
    m0 = 0.0
    for k in kappas:
        ks = build_bs_kernels(W, k, d, quad)
        norms.append(float(np.linalg.norm(ks.M - ks.M0)))
        m0 = float(np.linalg.norm(ks.M0))
    return HSReport(list(kappas), norms, m0, quad.size)


def bs_count(W, lam: float, kappa: float, d: float, quad: Optional[Quadrature] = None) -> int:
    """Eigenvalues of ``K(kappa)`` at or below ``-1/lambda`` for ``W <= 0``."""
    ks = build_bs_kernels(W, kappa, d, quad)
    sym = 0.5 * (ks.K + ks.K.T)
    ev = np.linalg.eigvalsh(sym)
    return int(np.sum(ev <= -1.0 / lam))


def b0_channel(W, lam: float, d: float, form: str = "weighted") -> Channel:
    """``B_0 + lambda W`` as a half-line channel.

    ``form="weighted"`` uses the unitarily equivalent form with weight
    ``(1+t)^(d-1)`` and a free end; ``form="transformed"`` uses ``B_0``
    itself, with its inverse-square potential and boundary term.
    """
    if form == "weighted":
        return Channel(0, 0.0, PowerWeight(1.0, d - 1.0), "neumann", lam, W)
    if form == "transformed":
        q = lambda t: (d - 1.0) * (d - 3.0) / (4.0 * (1.0 + np.asarray(t)) ** 2)  # noqa: E731
        return Channel(0, 0.0, PowerWeight(), "neumann", lam, W, background=q, robin=(d - 1.0) / 2.0)
    raise ValueError(f"unknown form {form!r}")
