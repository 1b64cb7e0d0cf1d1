"""Weighted half-line Schrodinger operators: discretization, Sturm counts and
lowest eigenvalues.

A channel is the quadratic form

    Q[f] = int_start^inf (|f'|^2 + (lambda V + q) |f|^2) w dt + r |f(start)|^2

in ``L^2((start, inf), w dt)``, with either the natural (Neumann) condition
or a Dirichlet condition at ``start``.  It is discretized by linear finite
elements on a breakpoint-aligned grid: stiffness uses ``w`` at cell
midpoints, the lumped mass and the potential use ``w`` and ``V`` at the
quarter points of each cell.  The result is a symmetric tridiagonal matrix
pencil ``(A, M)`` with diagonal ``M``.

Eigenvalues are found by bisection on Sturm counts of ``A - s M``; near zero
the bisection switches to geometric steps so that eigenvalues of size
``1e-20`` are resolved to full relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import BadGridError, UnconvergedError

__all__ = [
    "PowerWeight",
    "Channel",
    "Grid",
    "Pencil",
    "EigResult",
    "Numerics",
    "make_grid",
    "discretize_form",
    "sturm_count",
    "lowest_eigenvalues",
    "count_negative",
    "zero_energy_count",
    "solve_channel",
    "channel_grid",
]


@dataclass(frozen=True)
class PowerWeight:
    """Weight ``scale * (shift + t)**alpha``."""

    scale: float = 1.0
    alpha: float = 0.0
    shift: float = 1.0

    def __call__(self, t):
        return self.scale * (self.shift + np.asarray(t, dtype=float)) ** self.alpha

    def breakpoints(self, lo: float, hi: float) -> list:
        return []

    def inverse_tail(self, start: float) -> float:
        if self.alpha <= 1.0:
            return math.inf
        return (self.shift + start) ** (1.0 - self.alpha) / (self.scale * (self.alpha - 1.0))


@dataclass(frozen=True)
class Channel:
    """One weighted half-line operator.

    ``potential`` is multiplied by ``coupling``; ``background`` (if given) is
    a coupling-free potential term and ``robin`` adds ``robin |f(start)|^2``
    to the form when the left end is free.
    """

    k: int
    start: float
    weight: Any
    boundary: str
    coupling: float
    potential: Any
    multiplicity: int = 1
    background: Optional[Callable] = None
    robin: float = 0.0

    def __post_init__(self):
        if self.boundary not in ("neumann", "dirichlet"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.multiplicity < 0:
            raise ValueError("multiplicity must be >= 0")

    def with_coupling(self, lam: float) -> "Channel":
        return replace(self, coupling=lam)

    def breakpoints(self, lo: float, hi: float) -> list:
        pts = set(self.weight.breakpoints(lo, hi))
        pts |= {x for x in self.potential.breakpoints(lo, hi) if lo < x < hi}
        return sorted(pts)

    def support_end(self) -> float:
        return float(self.potential.support_end())


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes ``start = x_0 < ... < x_n = L`` and the right boundary flavor."""

    nodes: np.ndarray
    h: float
    right: str = "dirichlet"

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or len(x) < 3:
            raise BadGridError("a grid needs at least three nodes")
        if np.any(np.diff(x) <= 0):
            raise BadGridError("grid nodes must be strictly increasing")
        if self.right not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown right boundary {self.right!r}")
        object.__setattr__(self, "nodes", x)

    @property
    def start(self) -> float:
        return float(self.nodes[0])

    @property
    def L(self) -> float:
        return float(self.nodes[-1])

    @property
    def n(self) -> int:
        """Number of interior points."""
        return len(self.nodes) - 2

    def refine(self) -> "Grid":
        """Halve every cell."""
        x = self.nodes
        out = np.empty(2 * len(x) - 1)
        out[0::2] = x
        out[1::2] = 0.5 * (x[1:] + x[:-1])
        return Grid(out, self.h / 2.0, self.right)

    def with_right(self, right: str) -> "Grid":
        return Grid(self.nodes, self.h, right)


def make_grid(
    start: float,
    L: float,
    h: float,
    breakpoints: Sequence[float] = (),
    *,
    right: str = "dirichlet",
    core_end: Optional[float] = None,
    growth: float = 1.0,
    h_max: float = math.inf,
) -> Grid:
    """Breakpoint-aligned grid on ``[start, L]``.

    Cells have width at most ``h`` up to ``core_end``; beyond it the width
    grows like ``h + (growth - 1)(t - core_end)``, capped at ``h_max``.  Every
    breakpoint inside ``(start, L)`` is a node.
    """
    if not L > start:
        raise BadGridError(f"need L > start, got L={L}, start={start}")
    if not h > 0:
        raise BadGridError("h must be positive")
    core = L if core_end is None else min(max(core_end, start), L)
    h_max = max(h_max, h)
    tol = 1e-12 * max(1.0, abs(L))
    cuts = sorted({start, core, L} | {float(b) for b in breakpoints if start + tol < b < L - tol})
    nodes = [start]
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= tol:
            continue
        if b <= core + tol:
            n = max(1, int(math.ceil((b - a) / h - 1e-9)))
            nodes.extend(np.linspace(a, b, n + 1)[1:].tolist())
            continue
        t = a
        while True:
            step = min(h_max, max(h, (growth - 1.0) * (t - core) + h))
            if t + 1.3 * step >= b:
                nodes.append(b)
                break
            t += step
            nodes.append(t)
    x = np.asarray(nodes)
    if len(x) < 3:
        x = np.linspace(start, L, 3)
    return Grid(x, h, right)


@dataclass(frozen=True, eq=False)
class Pencil:
    """Tridiagonal pencil on all grid nodes, with boundary rows marked.

    ``diag``, ``off`` and ``mass`` are restricted to the free nodes: a
    Dirichlet row is eliminated, a Neumann row kept.
    """

    full_diag: np.ndarray
    full_off: np.ndarray
    full_mass: np.ndarray
    grid: Grid
    left_dirichlet: bool
    stiffness: np.ndarray = field(repr=False)

    @property
    def _slice(self):
        lo = 1 if self.left_dirichlet else 0
        hi = len(self.full_diag) - (1 if self.grid.right == "dirichlet" else 0)
        return lo, hi

    @property
    def diag(self):
        lo, hi = self._slice
        return self.full_diag[lo:hi]

    @property
    def off(self):
        lo, hi = self._slice
        return self.full_off[lo : hi - 1]

    @property
    def mass(self):
        lo, hi = self._slice
        return self.full_mass[lo:hi]

    @property
    def nodes(self):
        lo, hi = self._slice
        return self.grid.nodes[lo:hi]

    @property
    def size(self) -> int:
        lo, hi = self._slice
        return hi - lo

    def with_right(self, right: str) -> "Pencil":
        return replace(self, grid=self.grid.with_right(right))

    def symmetrized(self):
        """Diagonal and off-diagonal of ``M^-1/2 A M^-1/2``."""
        m = self.mass
        d = self.diag / m
        e = self.off / np.sqrt(m[:-1] * m[1:])
        return d, e

    def dense(self) -> np.ndarray:
        d, e = self.symmetrized()
        return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def _check_alignment(x, points):
    for p in points:
        i = int(np.searchsorted(x, p))
        near = min(abs(x[j] - p) for j in (i - 1, i) if 0 <= j < len(x))
        if near > 1e-9 * max(1.0, abs(p)):
            raise BadGridError(f"weight breakpoint {p:g} falls inside a grid cell")


def discretize_form(ch: Channel, grid: Grid) -> Pencil:
    """Finite-element pencil of the channel form on ``grid``."""
    x = grid.nodes
    if abs(x[0] - ch.start) > 1e-12 * max(1.0, abs(ch.start)):
        raise BadGridError(f"grid starts at {x[0]:g}, channel at {ch.start:g}")
    _check_alignment(x, ch.weight.breakpoints(x[0], x[-1]))
    hc = np.diff(x)
    mid = 0.5 * (x[1:] + x[:-1])
    tl = x[:-1] + 0.25 * hc
    tr = x[1:] - 0.25 * hc
    stiff = ch.weight(mid) / hc
    ml = 0.5 * hc * ch.weight(tl)
    mr = 0.5 * hc * ch.weight(tr)
    ql = ch.coupling * ch.potential(tl) if ch.coupling else np.zeros_like(tl)
    qr = ch.coupling * ch.potential(tr) if ch.coupling else np.zeros_like(tr)
    if ch.background is not None:
        ql = ql + ch.background(tl)
        qr = qr + ch.background(tr)
    n = len(x)
    a = np.zeros(n)
    m = np.zeros(n)
    a[:-1] += stiff + ql * ml
    a[1:] += stiff + qr * mr
    m[:-1] += ml
    m[1:] += mr
    if ch.boundary == "neumann":
        a[0] += ch.robin
    if np.any(m <= 0):
        raise BadGridError("weight vanishes at a quadrature point; mass is not positive")
    return Pencil(a, -stiff, m, grid, ch.boundary == "dirichlet", stiff)


def _sturm(a, o2, m, s) -> int:
    count = 0
    q = math.inf
    for ai, oi, mi in zip(a, o2, m):
        q = ai - s * mi - oi / q
        if q == 0.0:
            q = -1e-300
        if q < 0.0:
            count += 1
    return count


def _sturm_lists(pencil: Pencil):
    a = pencil.diag.tolist()
    off = pencil.off
    o2 = [0.0] + (off * off).tolist()
    return a, o2, pencil.mass.tolist()


def sturm_count(pencil: Pencil, s: float) -> int:
    """Number of pencil eigenvalues strictly below ``s`` (Sylvester inertia)."""
    return _sturm(*_sturm_lists(pencil), float(s))


@dataclass
class EigResult:
    """Negative eigenvalues of one operator, with diagnostics.

    ``values`` holds every computed eigenvalue (also nonnegative ones);
    ``eigenvalues`` only the negative ones.  ``bracket`` pairs the Dirichlet
    and Neumann truncations for every negative eigenvalue when available.
    """

    eigenvalues: tuple
    count: int
    grid: Optional[Grid] = None
    bracket: tuple = ()
    values: tuple = ()
    raw: tuple = ()
    extrapolated: bool = False
    iterations: int = 0

    @property
    def lowest(self) -> float:
        return self.eigenvalues[0] if self.eigenvalues else math.nan

    @property
    def bracket_width(self) -> float:
        if not self.bracket:
            return math.nan
        return max(abs(d - n) / abs(d) if d else math.inf for d, n in self.bracket)


def _gershgorin(pencil: Pencil):
    d, e = pencil.symmetrized()
    r = np.zeros_like(d)
    r[:-1] += np.abs(e)
    r[1:] += np.abs(e)
    return float(np.min(d - r)), float(np.max(d + r))


_TINY = 1e-290


def _bisect(count, j, lo, hi, rtol):
    """Locate the ``j``-th eigenvalue (1-based) in ``[lo, hi]``."""
    for _ in range(5000):
        if lo < 0.0 < hi:
            mid = 0.0
        elif hi <= 0.0:
            if hi == 0.0:
                if -lo < _TINY:
                    return 0.0
                mid = lo * 1e-3
            elif hi - lo <= rtol * (-hi):
                break
            elif lo / hi > 2.0:
                mid = -math.sqrt(lo * hi)
            else:
                mid = 0.5 * (lo + hi)
        else:
            if lo == 0.0:
                if hi < _TINY:
                    return 0.0
                mid = hi * 1e-3
            elif hi - lo <= rtol * lo:
                break
            elif hi / lo > 2.0:
                mid = math.sqrt(lo * hi)
            else:
                mid = 0.5 * (lo + hi)
        if count(mid) >= j:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def lowest_eigenvalues(pencil: Pencil, m: int, rtol: float = 1e-10) -> EigResult:
    """The ``m`` smallest eigenvalues of the pencil by Sturm bisection."""
    lists = _sturm_lists(pencil)
    cache: dict = {}

    def count(s):
        if s not in cache:
            cache[s] = _sturm(*lists, s)
        return cache[s]

    m = min(m, pencil.size)
    glo, ghi = _gershgorin(pencil)
    glo = glo - 1e-12 * max(1.0, abs(glo)) - 1.0
    ghi = ghi + 1e-12 * max(1.0, abs(ghi)) + 1.0
    cache[glo] = 0
    cache[ghi] = pencil.size
    values = []
    for j in range(1, m + 1):
        lo = max(s for s, c in cache.items() if c < j)
        hi = min(s for s, c in cache.items() if c >= j)
        values.append(_bisect(count, j, lo, hi, rtol))
    neg = tuple(v for v in values if v < 0)
    return EigResult(
        eigenvalues=neg, count=count(0.0), grid=pencil.grid, values=tuple(values)
    )


def zero_energy_count(pencil: Pencil, weight) -> int:
    """Negative eigenvalues of the untruncated channel from its zero-energy solution.

    The discrete zero-energy solution is continued beyond the last node with
    ``w u' = const``, so ``u(inf) = u_L + F int_L^inf dt / w``; a sign change
    between ``u_L`` and ``u(inf)`` is one more eigenvalue.  When the integral
    diverges, the sign of the flux decides.
    """
    a = pencil.full_diag.tolist()
    off = pencil.full_off.tolist()
    n = len(a)
    if pencil.left_dirichlet:
        u_prev, u, i = 0.0, 1.0, 1
    else:
        u_prev, u, i = 0.0, 1.0, 0
    sign = 1.0
    changes = 0
    while i < n - 1:
        left = off[i - 1] * u_prev if i > 0 else 0.0
        u_next = -(a[i] * u + left) / off[i]
        if u_next * sign < 0.0:
            changes += 1
            sign = -sign
        u_prev, u = u, u_next
        if abs(u) > 1e200:
            u_prev *= 1e-200
            u *= 1e-200
        i += 1
    flux = pencil.stiffness[-1] * (u - u_prev)
    tail = weight.inverse_tail(pencil.grid.L)
    if math.isfinite(tail):
        u_inf = u + flux * tail
        if u_inf * u < 0.0:
            changes += 1
    elif flux * u < 0.0:
        changes += 1
    return changes


def count_negative(
    ch: Channel, grid: Grid, s: float = 0.0, *, check_refinement: bool = True
) -> int:
    """Number of eigenvalues below ``s <= 0``, stable under ``h -> h/2``.

    At ``s = 0`` the count comes from the zero-energy solution with the exact
    tail continuation.  For ``s < 0`` the Dirichlet and Neumann truncations
    at ``L`` must agree, otherwise ``L`` is too short.
    """
    if s > 0:
        raise ValueError("count_negative needs s <= 0")
    if ch.coupling == 0 and ch.background is None:
        return 0
    if s == 0 and ch.background is not None:
        raise ValueError("zero-energy count needs a potential with compact effective support")

    def single(g):
        pen = discretize_form(ch, g)
        if s < 0:
            nd = sturm_count(pen.with_right("dirichlet"), s)
            nn = sturm_count(pen.with_right("neumann"), s)
            if nd != nn:
                raise UnconvergedError(
                    f"truncation at L={g.L:g} too short: Dirichlet count {nd}, Neumann {nn}"
                )
            return nd
        return zero_energy_count(pen, ch.weight)

    c1 = single(grid)
    if check_refinement:
        c2 = single(grid.refine())
        if c1 != c2:
            raise UnconvergedError(f"count changes under refinement: {c1} at h, {c2} at h/2")
    return c1


@dataclass(frozen=True)
class Numerics:
    """Discretization policy for channel solves.

    With ``auto_truncate`` the truncation length starts at ``L`` (or a
    default) and grows until the Dirichlet and Neumann truncations agree to
    ``bracket_tol`` relative; beyond the core region (the effective support
    of the potential) cells grow geometrically up to ``h_max_factor / kappa``.
    """

    h: float = 0.02
    L: Optional[float] = None
    auto_truncate: bool = True
    richardson: bool = False
    growth: float = 1.02
    h_max_factor: float = 0.02
    bracket_tol: float = 1e-4
    max_eigs: int = 64
    max_iter: int = 60
    right: str = "dirichlet"


def channel_grid(ch: Channel, L: float, numerics: Numerics, h_max: float = math.inf, right=None):
    core = max(ch.start, min(ch.support_end(), L))
    if core <= ch.start:
        core = min(L, ch.start + 1.0)
    growth = numerics.growth if numerics.auto_truncate else 1.0
    return make_grid(
        ch.start,
        L,
        numerics.h,
        ch.breakpoints(ch.start, L),
        right=right or numerics.right,
        core_end=core,
        growth=growth,
        h_max=h_max,
    )


def _richardson(ch, grid, m, coarse):
    fine = lowest_eigenvalues(discretize_form(ch, grid.refine()), m).values[:m]
    return tuple((4.0 * f - c) / 3.0 for f, c in zip(fine, coarse))


def solve_channel(ch: Channel, numerics: Numerics = Numerics()) -> EigResult:
    """Negative eigenvalues of one channel operator."""
    if ch.coupling == 0 and ch.background is None:
        return EigResult((), 0)
    if not numerics.auto_truncate:
        if numerics.L is None:
            raise ValueError("a fixed truncation needs numerics.L")
        grid = channel_grid(ch, numerics.L, numerics)
        pen = discretize_form(ch, grid)
        n = sturm_count(pen, 0.0)
        if n == 0:
            return EigResult((), 0, grid)
        m = min(n, numerics.max_eigs)
        vals = lowest_eigenvalues(pen, m).values[:m]
        other = "neumann" if grid.right == "dirichlet" else "dirichlet"
        alt = lowest_eigenvalues(pen.with_right(other), m).values[:m]
        pairs = tuple(zip(vals, alt)) if other == "neumann" else tuple(zip(alt, vals))
        raw = vals
        if numerics.richardson:
            vals = _richardson(ch, grid, m, vals)
        return EigResult(tuple(vals), n, grid, pairs, tuple(raw), tuple(raw), numerics.richardson)

    start = ch.start
    core = max(ch.support_end(), start)
    L = numerics.L if numerics.L is not None else max(2.0 * core, start + 20.0)
    kappa = None
    for it in range(1, numerics.max_iter + 1):
        h_max = numerics.h_max_factor / kappa if kappa else math.inf
        grid = channel_grid(ch, L, numerics, h_max, right="dirichlet")
        pen = discretize_form(ch, grid)
        if ch.background is None:
            n = zero_energy_count(pen, ch.weight)
        else:
            n = sturm_count(pen.with_right("neumann"), 0.0)
        if n == 0:
            return EigResult((), 0, grid, iterations=it)
        m = min(n, numerics.max_eigs)
        en = lowest_eigenvalues(pen.with_right("neumann"), m).values[:m]
        ed = lowest_eigenvalues(pen, m).values[:m]
        shallow = [e for e in en if e < 0]
        if not shallow:
            raise UnconvergedError("Neumann truncation lost the negative eigenvalues")
        kappa = math.sqrt(-shallow[-1])
        ok = all(d < 0 and abs(d - e) <= numerics.bracket_tol * abs(d) for d, e in zip(ed, en))
        if ok:
            raw = tuple(ed)
            vals = _richardson(ch, grid, m, ed) if numerics.richardson else raw
            return EigResult(
                tuple(vals), n, grid, tuple(zip(ed, en)), raw, raw, numerics.richardson, it
            )
        L = max(start + 2.0 * (L - start), start + 15.0 / kappa)
    raise UnconvergedError(f"truncation did not converge after {numerics.max_iter} doublings")
