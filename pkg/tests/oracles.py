"""Independent reference computations shared by the tests.

Nothing here calls into the package: Bessel values come from the defining
power series in mpmath, Green functions from ODE integration, and
eigenvalues from transcendental equations solved by bisection.
"""

import math

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def bessel_i_series(nu, x, dps=40):
    with mp.workdps(dps):
        x = mp.mpf(x)
        nu = mp.mpf(nu)
        s = mp.mpf(0)
        k = 0
        while True:
            term = (x / 2) ** (2 * k + nu) / (mp.factorial(k) * mp.gamma(k + nu + 1))
            s += term
            if abs(term) < mp.mpf(10) ** (-dps + 2) * abs(s):
                return s
            k += 1


def bessel_k_series(nu, x, dps=40):
    with mp.workdps(dps):
        nu = mp.mpf(nu)
        return mp.pi / 2 * (bessel_i_series(-nu, x, dps) - bessel_i_series(nu, x, dps)) / mp.sin(nu * mp.pi)


def _integrate(q, kappa, y0, t0, t1):
    def rhs(t, y):
        return [y[1], (q(t) + kappa**2) * y[0]]

    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    return sol.sol


def green_by_shooting(q, kappa, left, t, tp, T=None):
    """``(-d^2/dt^2 + q + kappa^2)^-1`` kernel from two solutions and their Wronskian.

    ``left = (t0, u(t0), u'(t0))`` starts the solution satisfying the left
    boundary condition; the decaying solution is integrated backwards from
    ``T`` where it is started on the free exponential.
    """
    t0, u0, du0 = left
    T = T if T is not None else max(t, tp) + 40.0 / kappa
    lo, hi = min(t, tp), max(t, tp)
    L = _integrate(q, kappa, [u0, du0], t0, T)
    R = _integrate(q, kappa, [1.0, -kappa], T, t0)
    ul, dul = L(hi)
    ur, dur = R(hi)
    wr = ul * dur - dul * ur
    return float(L(lo)[0] * R(hi)[0] / (-wr))


def neumann_well_even_state(lam):
    """Lowest ``E = -kappa^2`` of ``-u'' - lam 1_[0,1] u`` with ``u'(0) = 0``."""
    f = lambda k: math.sqrt(lam - k * k) * math.tan(math.sqrt(lam - k * k)) - k  # noqa: E731
    hi = math.sqrt(lam) * (1 - 1e-15)
    lo = 0.0 if math.sqrt(lam) < math.pi / 2 else math.sqrt(max(lam - (math.pi / 2) ** 2, 0.0)) + 1e-12
    return -brentq(f, lo, hi, xtol=1e-15) ** 2


def dirichlet_well_states(lam):
    """All ``E`` of ``-u'' - lam 1_[0,1] u`` with ``u(0) = 0``: ``k cot k = -kappa``."""
    out = []
    root = math.sqrt(lam)
    n = 0
    while (n + 0.5) * math.pi < root:
        a = (n + 0.5) * math.pi
        b = min((n + 1) * math.pi, root)

        def f(kk):
            return kk / math.tan(kk) + math.sqrt(max(lam - kk * kk, 0.0))

        if f(a + 1e-12) * f(b - 1e-12) < 0:
            k = brentq(f, a + 1e-12, b - 1e-12, xtol=1e-15)
            out.append(-(lam - k * k))
        n += 1
    return sorted(out)


def free_count(lam):
    """Number of negative eigenvalues of the Neumann/Dirichlet well (bound-state counts)."""
    r = math.sqrt(lam)
    neumann = int(math.floor(r / math.pi)) + 1
    dirichlet = int(math.floor(r / math.pi + 0.5))
    return neumann, dirichlet


def tridiag_lowest(a, b):
    """Lowest eigenvalue of a symmetric tridiagonal matrix by dense numpy."""
    M = np.diag(a) + np.diag(b, 1) + np.diag(b, -1)
    return float(np.linalg.eigvalsh(M)[0])
