"""Radial potentials, weighted moments and envelope-modified potentials.

Potentials are sums of closed-form pieces so that every run is reproducible
from a configuration file:

* ``constant``  -- ``value`` on ``[lo, hi)``
* ``exp_poly``  -- ``(c_0 + c_1 t + ... + c_n t^n) exp(-rate t)`` on ``[lo, hi)``
* ``gaussian``  -- ``amplitude exp(-((t - center)/width)^2)`` on ``[lo, hi)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import DivergentMomentError
from .tree import Envelope, RegularTree

__all__ = [
    "Piece",
    "RadialPotential",
    "ModifiedPotential",
    "square_well",
    "gaussian_well",
    "exp_poly",
    "eval_potential",
    "moment",
    "weighted_integral",
    "modified_potential",
]

_KINDS = ("constant", "exp_poly", "gaussian")


@dataclass(frozen=True)
class Piece:
    kind: str
    lo: float
    hi: float
    params: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown piece kind {self.kind!r}")
        if not self.hi > self.lo or self.lo < 0:
            raise ValueError(f"bad piece interval [{self.lo}, {self.hi})")
        if self.kind == "gaussian" and not self.params[2] > 0:
            raise ValueError("gaussian width must be positive")

    def raw(self, t):
        if self.kind == "constant":
            return np.full_like(t, self.params[0])
        if self.kind == "exp_poly":
            coeffs, rate = self.params
            return np.polynomial.polynomial.polyval(t, coeffs) * np.exp(-rate * t)
        amp, center, width = self.params
        return amp * np.exp(-(((t - center) / width) ** 2))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= self.lo) & (t < self.hi)
        return np.where(inside, self.raw(np.where(inside, t, self.lo)), 0.0)

    @property
    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.params[0] == 0
        if self.kind == "exp_poly":
            return not any(self.params[0])
        return self.params[0] == 0

    @property
    def decays(self) -> bool:
        """Whether the piece is compactly supported or decays exponentially."""
        if math.isfinite(self.hi) or self.is_zero:
            return True
        if self.kind == "constant":
            return False
        if self.kind == "exp_poly":
            return self.params[1] > 0
        return True

    def sup(self) -> float:
        if self.is_zero:
            return 0.0
        if self.kind == "constant":
            return abs(self.params[0])
        if self.kind == "gaussian":
            return abs(self.params[0])
        coeffs, rate = self.params
        top = self.hi if math.isfinite(self.hi) else self.lo + 60.0 / max(rate, 1e-3)
        t = np.linspace(self.lo, top, 4001)
        return float(np.max(np.abs(self.raw(t)))) * 1.001

    def support_end(self, rel_tol: float) -> float:
        """Point beyond which ``|piece| <= rel_tol * sup``."""
        if self.is_zero:
            return self.lo
        if math.isfinite(self.hi):
            return self.hi
        if not self.decays:
            return math.inf
        if self.kind == "gaussian":
            _, center, width = self.params
            return max(self.lo, center + width * math.sqrt(math.log(1.0 / rel_tol)))
        top = self.sup()
        t = max(self.lo, 1.0)
        while abs(self.raw(np.asarray(t))) > rel_tol * top or self._rising(t):
            t *= 1.5
        return t

    def _rising(self, t) -> bool:
        a = abs(float(self.raw(np.asarray(t))))
        b = abs(float(self.raw(np.asarray(t * 1.01))))
        return b > a

    def scaled(self, c: float) -> "Piece":
        if self.kind == "constant":
            params = (self.params[0] * c,)
        elif self.kind == "exp_poly":
            params = (tuple(x * c for x in self.params[0]), self.params[1])
        else:
            params = (self.params[0] * c,) + tuple(self.params[1:])
        return Piece(self.kind, self.lo, self.hi, params)


class RadialPotential:
    """Bounded radial potential ``V(t)``, a sum of closed-form pieces."""

    def __init__(self, pieces: Sequence[Piece]):
        self.pieces = tuple(pieces)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p in self.pieces:
            out = out + p(t)
        return out

    def __add__(self, other: "RadialPotential") -> "RadialPotential":
        return RadialPotential(self.pieces + other.pieces)

    def scaled(self, c: float) -> "RadialPotential":
        return RadialPotential([p.scaled(c) for p in self.pieces])

    def __repr__(self):
        return f"RadialPotential({list(self.pieces)!r})"

    @property
    def bound(self) -> float:
        """Upper bound for ``sup |V|`` (sum of the piece maxima)."""
        return float(sum(p.sup() for p in self.pieces))

    @property
    def decays(self) -> bool:
        return all(p.decays for p in self.pieces)

    @property
    def nonpositive(self) -> bool:
        t = np.linspace(0.0, min(self.support_end(1e-12), 1e6), 20001)
        return bool(np.all(self(t) <= 0))

    def breakpoints(self, lo: float = 0.0, hi: float = math.inf) -> list:
        pts = set()
        for p in self.pieces:
            for x in (p.lo, p.hi):
                if math.isfinite(x) and lo < x < hi:
                    pts.add(x)
        return sorted(pts)

    def support_end(self, rel_tol: float = 1e-14) -> float:
        """Radius beyond which ``|V|`` is below ``rel_tol`` times its bound."""
        ends = [p.support_end(rel_tol) for p in self.pieces if not p.is_zero]
        return max(ends) if ends else 0.0


class ModifiedPotential:
    """``t -> g_k(t) / (a (1+t)^alpha) * V(t)``, zero below ``t_k``."""

    def __init__(self, V: RadialPotential, tree: RegularTree, k: int, scale: float, alpha: float):
        self.V = V
        self.tree = tree
        self.k = k
        self.scale = scale
        self.alpha = alpha

    def ratio(self, t):
        t = np.asarray(t, dtype=float)
        return self.tree.g(self.k, t) / (self.scale * (1.0 + t) ** self.alpha)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.ratio(t) * self.V(t)

    @property
    def bound(self) -> float:
        end = self.support_end()
        cuts = [self.tree.distance(self.k)] + self.tree.vertices_between(
            self.tree.distance(self.k), end
        )
        worst = max(self.tree.g(self.k, c) / (self.scale * (1 + c) ** self.alpha) for c in cuts)
        return worst * self.V.bound

    @property
    def decays(self) -> bool:
        return self.V.decays

    def breakpoints(self, lo: float = 0.0, hi: float = math.inf) -> list:
        hi = min(hi, self.support_end())
        pts = set(self.V.breakpoints(lo, hi)) | set(self.tree.vertices_between(lo, hi))
        tk = self.tree.distance(self.k)
        if lo < tk < hi:
            pts.add(tk)
        return sorted(pts)

    def support_end(self, rel_tol: float = 1e-14) -> float:
        return self.V.support_end(rel_tol)


def square_well(depth: float, lo: float = 0.0, hi: float = 1.0) -> RadialPotential:
    """Constant ``depth`` on ``[lo, hi)`` (use a negative depth for a well)."""
    return RadialPotential([Piece("constant", lo, hi, (float(depth),))])


def gaussian_well(
    amplitude: float = -1.0, width: float = 1.0, center: float = 0.0, lo: float = 0.0
) -> RadialPotential:
    return RadialPotential([Piece("gaussian", lo, math.inf, (float(amplitude), center, width))])


def exp_poly(coeffs: Sequence[float], rate: float, lo: float = 0.0, hi: float = math.inf):
    return RadialPotential([Piece("exp_poly", lo, hi, (tuple(float(c) for c in coeffs), rate))])


def eval_potential(V, t):
    """Evaluate ``V`` at ``t >= 0``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    return V(t)


def weighted_integral(
    f: Callable,
    breakpoints: Sequence[float],
    lo: float,
    support_end: float,
    *,
    decays: bool = True,
    epsabs: float = 1e-13,
    epsrel: float = 1e-12,
):
    """Integrate ``f`` over ``[lo, inf)`` panel by panel.

    Panels are split at ``breakpoints``; past ``support_end`` the integration
    range is doubled until a further doubling adds less than the requested
    tolerance.  Returns ``(value, abserr)``.
    """
    if not decays:
        raise DivergentMomentError("potential does not decay at infinity")
    if not math.isfinite(support_end):
        raise DivergentMomentError("potential has no finite effective support")
    top = max(support_end, lo)
    cuts = sorted({lo, top} | {x for x in breakpoints if lo < x < top})
    total = 0.0
    err = 0.0

    def panel(a, b):
        if b <= a:
            return 0.0, 0.0
        v, e = integrate.quad(lambda s: float(f(s)), a, b, epsabs=epsabs, epsrel=epsrel, limit=400)
        return v, e

    for a, b in zip(cuts[:-1], cuts[1:]):
        v, e = panel(a, b)
        total += v
        err += e
    # tail: doubling until stable
    a = top
    width = max(1.0, top)
    for _ in range(60):
        b = a + width
        v, e = panel(a, b)
        total += v
        err += e
        probe = abs(float(f(b)))
        if abs(v) <= max(epsabs, epsrel * abs(total)) and probe < 1e-14:
            break
        a = b
        width *= 2.0
    else:
        raise DivergentMomentError("tail of the weighted integral does not settle")
    return total, err


def _weight_function(weight: str, p: float, tree: Optional[RegularTree], d: Optional[float]):
    if weight == "power":
        return (lambda t: (1.0 + t) ** p), []
    if weight == "t_power":
        return (lambda t: t**p), []
    if tree is None:
        raise ValueError(f"weight {weight!r} needs a tree")
    if weight == "g0":
        return (lambda t: tree.g(0, t)), tree
    if weight == "g0_t2d":
        if d is None:
            raise ValueError("weight 'g0_t2d' needs d")
        return (lambda t: tree.g(0, t) * t ** (2.0 - d)), tree
    raise ValueError(f"unknown weight {weight!r}")


def moment(
    V,
    p: float = 0.0,
    weight: str = "power",
    *,
    tree: Optional[RegularTree] = None,
    d: Optional[float] = None,
    absolute: bool = False,
    full_output: bool = False,
):
    """Weighted moment ``int_0^inf w(t) V(t) dt`` (or with ``|V|``).

    ``weight`` selects ``w``: ``"power"`` is ``(1+t)^p``, ``"t_power"`` is
    ``t^p``, ``"g0"`` is ``g_0(t)`` and ``"g0_t2d"`` is ``g_0(t) t^(2-d)``.
    With ``full_output`` the estimated absolute error is returned as well.
    """
    wfun, src = _weight_function(weight, p, tree, d)
    end = V.support_end()
    bps = list(V.breakpoints(0.0, end))
    if isinstance(src, RegularTree):
        bps += src.vertices_between(0.0, end)
    if absolute:
        f = lambda t: wfun(t) * abs(V(t))  # noqa: E731
    else:
        f = lambda t: wfun(t) * V(t)  # noqa: E731
    value, err = weighted_integral(f, bps, 0.0, end, decays=V.decays)
    return (value, err) if full_output else value


def modified_potential(
    V: RadialPotential, tree: RegularTree, k: int, d: float, envelope: Envelope, sign: int
) -> ModifiedPotential:
    """``V_k^-`` (``sign=-1``) or ``V_k^+`` (``sign=+1``) for channel ``k``."""
    if envelope.k != k:
        raise ValueError("envelope belongs to a different channel")
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    scale = envelope.lower if sign < 0 else envelope.upper
    return ModifiedPotential(V, tree, k, scale, d - 1.0)
