"""Regular rooted metric trees and their branching functions.

A regular tree is described by the distances ``t_1 < t_2 < ...`` of the
generation vertices from the root and the branching numbers ``b_1, b_2, ...``
of those vertices.  The branching function ``g_k(t)`` counts the branches at
distance ``t`` inside a generation-``k`` subtree; ``g_0`` counts all points of
the tree at distance ``t`` from the root.

Trees store a finite list of generations.  Beyond the last stored vertex an
explicit tree continues without further branching (``b = 1``), while a
geometric tree keeps branching with its generating ratio, so geometric trees
are genuinely infinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateRangeError, UnboundedRatioError

__all__ = [
    "RegularTree",
    "Envelope",
    "TreeWeight",
    "gk_eval",
    "multiplicity",
    "make_geometric_tree",
    "make_terminal_tree",
    "make_half_line",
    "dimension_estimate",
    "envelope_constants",
    "power_lower_constant",
]


@dataclass(frozen=True)
class RegularTree:
    """Regular rooted metric tree.

    Parameters
    ----------
    vertex_distances : sequence of float
        Strictly increasing distances ``t_1 < t_2 < ...`` with ``t_1 > 0``.
    branching_numbers : sequence of int
        Branching number ``b_k >= 1`` of every generation-``k`` vertex.
    declared_dimension : float, optional
        Global dimension the family is designed to realize.
    geometric_ratio : float, optional
        If set, the tree continues past its stored generations with
        ``t_{n+1} = ratio * t_n`` and the last branching number repeated.
    """

    vertex_distances: tuple
    branching_numbers: tuple
    declared_dimension: Optional[float] = None
    geometric_ratio: Optional[float] = None
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _prefix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = tuple(float(x) for x in self.vertex_distances)
        b = tuple(int(x) for x in self.branching_numbers)
        if len(t) != len(b):
            raise ValueError("vertex_distances and branching_numbers differ in length")
        if t and t[0] <= 0:
            raise ValueError("t_1 must be positive")
        if any(t2 <= t1 for t1, t2 in zip(t, t[1:])):
            raise ValueError("vertex distances must be strictly increasing")
        if any(bk < 1 for bk in b):
            raise ValueError("branching numbers must be >= 1")
        if b and max(b) < 2:
            raise ValueError("a tree with generations needs at least one b_k >= 2")
        if self.geometric_ratio is not None:
            if not t:
                raise ValueError("geometric continuation needs at least one generation")
            if self.geometric_ratio <= 1:
                raise ValueError("geometric ratio must exceed 1")
        object.__setattr__(self, "vertex_distances", t)
        object.__setattr__(self, "branching_numbers", b)
        object.__setattr__(self, "_t", np.asarray(t, dtype=float))
        prefix = np.ones(len(b) + 1)
        prefix[1:] = np.cumprod(np.asarray(b, dtype=float))
        object.__setattr__(self, "_prefix", prefix)

    # -- generation bookkeeping ------------------------------------------------

    @property
    def generations(self) -> int:
        return len(self.vertex_distances)

    @property
    def is_half_line(self) -> bool:
        return not self.vertex_distances

    def branching(self, k: int) -> int:
        """Branching number ``b_k`` (``b_0 = 1``), including the continuation."""
        if k <= 0:
            return 1
        if k <= self.generations:
            return self.branching_numbers[k - 1]
        if self.geometric_ratio is not None:
            return self.branching_numbers[-1]
        return 1

    def distance(self, k: int) -> float:
        """Distance ``t_k`` of generation ``k`` (``t_0 = 0``)."""
        if k <= 0:
            return 0.0
        n = self.generations
        if k <= n:
            return self.vertex_distances[k - 1]
        if self.geometric_ratio is not None:
            return self.vertex_distances[-1] * self.geometric_ratio ** (k - n)
        return math.inf

    def product(self, k: int) -> float:
        """``b_1 b_2 ... b_k`` as a float (1 for ``k = 0``)."""
        n = self.generations
        if k <= n:
            return float(self._prefix[max(k, 0)])
        if self.geometric_ratio is not None:
            return float(self._prefix[n]) * float(self.branching_numbers[-1]) ** (k - n)
        return float(self._prefix[n])

    def generation_of(self, t):
        """Number of vertex generations at distance ``<= t`` (vectorized)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self._t, t, side="right")
        if self.geometric_ratio is not None:
            n = self.generations
            last = self._t[-1]
            beyond = t >= last
            if np.any(beyond):
                with np.errstate(divide="ignore"):
                    extra = np.floor(
                        np.log(np.where(beyond, t, last) / last)
                        / math.log(self.geometric_ratio)
                        + 1e-12
                    )
                idx = np.where(beyond, n + extra.astype(np.int64), idx)
        return idx

    def _products_at(self, idx):
        idx = np.asarray(idx)
        n = self.generations
        base = self._prefix[np.minimum(idx, n)]
        if self.geometric_ratio is not None:
            extra = np.maximum(idx - n, 0)
            base = base * float(self.branching_numbers[-1]) ** extra
        return base

    def g(self, k: int, t):
        """Branching function ``g_k`` evaluated at ``t`` (scalar or array)."""
        scalar = np.ndim(t) == 0
        t = np.asarray(t, dtype=float)
        idx = self.generation_of(t)
        vals = self._products_at(idx) / self.product(k)
        if k >= 1:
            vals = np.where(t < self.distance(k), 0.0, vals)
        return float(vals) if scalar else vals

    def vertices_between(self, lo: float, hi: float) -> list:
        """Vertex distances strictly inside ``(lo, hi)``."""
        out = [x for x in self.vertex_distances if lo < x < hi]
        if self.geometric_ratio is not None and self.vertex_distances:
            x = self.vertex_distances[-1] * self.geometric_ratio
            while x < hi:
                if x > lo:
                    out.append(x)
                x *= self.geometric_ratio
        return out

    def inverse_weight_tail(self, k: int, start: float) -> float:
        """``int_start^inf dt / g_k(t)`` for ``start >= t_k``; ``inf`` if divergent."""
        start = max(start, self.distance(k))
        pk = self.product(k)
        n = self.generations
        j = int(self.generation_of(start))
        total = 0.0
        left = start
        while j < n:
            right = self.vertex_distances[j]
            total += (right - left) * pk / self.product(j)
            left = right
            j += 1
        if self.geometric_ratio is None:
            return math.inf
        beta = self.geometric_ratio
        b = float(self.branching_numbers[-1])
        if beta >= b:
            return math.inf
        # pieces [t_j beta^i, t_j beta^{i+1}) with weight P_j b^i / P_k
        tj = self.distance(j)
        pj = self.product(j)
        head = (tj * beta - left) * pk / pj
        rest = (beta - 1.0) * tj * beta * (pk / (pj * b)) / (1.0 - beta / b)
        return total + head + rest


@dataclass(frozen=True)
class Envelope:
    """Power-law bracket ``lower (1+t)^exponent <= g_k(t) <= upper (1+t)^exponent``."""

    k: int
    lower: float
    upper: float
    exponent: float
    valid_from: float
    checked_to: float
    tail_exact: bool = False

    def lower_weight(self, t):
        return self.lower * (1.0 + np.asarray(t, dtype=float)) ** self.exponent

    def upper_weight(self, t):
        return self.upper * (1.0 + np.asarray(t, dtype=float)) ** self.exponent


class TreeWeight:
    """The branching function ``g_k`` packaged as a half-line weight."""

    def __init__(self, tree: RegularTree, k: int = 0):
        self.tree = tree
        self.k = k

    def __call__(self, t):
        return self.tree.g(self.k, t)

    def breakpoints(self, lo: float, hi: float) -> list:
        return self.tree.vertices_between(lo, hi)

    def inverse_tail(self, start: float) -> float:
        return self.tree.inverse_weight_tail(self.k, start)

    def __repr__(self):
        return f"TreeWeight(k={self.k})"


def gk_eval(tree: RegularTree, k: int, t):
    """Evaluate the branching function ``g_k(t)``; right-continuous at vertices."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    return tree.g(k, t)


def multiplicity(tree: RegularTree, k: int) -> int:
    """How many copies of channel ``k`` appear: ``b_1...b_{k-1} (b_k - 1)``."""
    if k < 1:
        raise ValueError("channel multiplicities are defined for k >= 1")
    m = 1
    for j in range(1, k):
        m *= tree.branching(j)
    return m * (tree.branching(k) - 1)


def make_geometric_tree(d: float, b: int, generations: Optional[int] = None) -> RegularTree:
    """Tree with ``b_k = b`` and ``t_k = beta**k``, ``beta = b**(1/(d-1))``.

    Then ``g_0(t_k) = b**k = t_k**(d-1)`` exactly, so the tree has global
    dimension ``d``.  By default enough generations are stored to reach
    ``t = 1e40``; the tree continues geometrically beyond that anyway.
    """
    if d <= 1:
        raise ValueError("geometric trees need d > 1; use make_terminal_tree for d = 1")
    if b < 2:
        raise ValueError("branching number must be >= 2")
    beta = float(b) ** (1.0 / (d - 1.0))
    if generations is None:
        generations = max(4, int(math.ceil(40.0 / math.log10(beta))))
    t = [beta**k for k in range(1, generations + 1)]
    return RegularTree(tuple(t), (b,) * generations, declared_dimension=d, geometric_ratio=beta)


def make_terminal_tree(branching: Sequence[int], distances: Sequence[float]) -> RegularTree:
    """Finite branching followed by unbranched rays (global dimension 1)."""
    return RegularTree(tuple(distances), tuple(branching), declared_dimension=1.0)


def make_half_line() -> RegularTree:
    """The bare half-line: no vertices, ``g_0 == 1``."""
    return RegularTree((), (), declared_dimension=1.0)


def dimension_estimate(tree: RegularTree, t_min: float, t_max: float) -> float:
    """Global dimension from a log-log fit of ``g_0`` over ``[t_min, t_max]``.

    ``g_0`` is sampled at the vertex distances inside the window, where the
    right-continuous staircase touches its power-law profile; for a geometric
    tree these points are log-spaced and the fit is exact.
    """
    if not t_max > t_min:
        raise ValueError("need t_max > t_min")
    pts = [x for x in tree.vertices_between(t_min * (1 - 1e-12), t_max * (1 + 1e-12))]
    if len(pts) < 4:
        raise DegenerateRangeError(
            f"only {len(pts)} generations in [{t_min}, {t_max}]; need at least 4"
        )
    x = np.log(np.asarray(pts))
    y = np.log(tree.g(0, np.asarray(pts)))
    slope = np.polyfit(x, y, 1)[0]
    return float(slope + 1.0)


def _piece_ratios(tree: RegularTree, k: int, alpha: float, start: float, stop: float):
    """Per-piece (sup, inf) of ``g_k(t) / (1+t)^alpha`` on ``[start, stop]``.

    ``g_k`` is constant on each piece and ``(1+t)^alpha`` is nondecreasing,
    so the supremum sits at the left end and the infimum at the right end.
    """
    cuts = [start] + tree.vertices_between(start, stop) + [stop]
    sups, infs = [], []
    for left, right in zip(cuts[:-1], cuts[1:]):
        gval = tree.g(k, left)
        sups.append(gval / (1.0 + left) ** alpha)
        infs.append(gval / (1.0 + right) ** alpha)
    return np.asarray(sups), np.asarray(infs), cuts


def _check_growth(tree, k, alpha, stop):
    """Raise when the ratio keeps drifting by more than 10% per generation."""
    probes = tree.vertices_between(stop, math.inf if tree.geometric_ratio else stop * 16)
    probes = probes[:4]
    while len(probes) < 4:
        probes.append((probes[-1] if probes else stop) * 2.0)
    vals = np.array([tree.g(k, p) / (1.0 + p) ** alpha for p in probes])
    steps = vals[1:] / vals[:-1]
    if np.all(steps > 1.1):
        raise UnboundedRatioError(
            f"g_{k}/(1+t)^{alpha:g} grows by >10% per generation beyond t={stop:g}; "
            "supplied dimension is too small"
        )
    if np.all(steps < 1 / 1.1):
        raise UnboundedRatioError(
            f"g_{k}/(1+t)^{alpha:g} decays by >10% per generation beyond t={stop:g}; "
            "supplied dimension is too large"
        )


def _matches_geometric(tree: RegularTree, d: float) -> bool:
    if tree.geometric_ratio is None:
        return False
    b = tree.branching_numbers[-1]
    return abs(math.log(b) / math.log(tree.geometric_ratio) - (d - 1.0)) < 1e-9


def envelope_constants(
    tree: RegularTree, k: int, d: float, L_check: Optional[float] = None
) -> Envelope:
    """Constants ``a^-_k <= g_k(t)/(1+t)^(d-1) <= a^+_k`` for ``t >= t_k``.

    The ratio is scanned exactly piece by piece on ``[t_k, L_check]``.  For a
    geometric tree of matching dimension the scan is completed by the exact
    limits of the per-generation extremes (``b^-k`` above, ``b^-(k+1)``
    below); otherwise the drift of the ratio beyond ``L_check`` is checked.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    alpha = d - 1.0
    start = tree.distance(k)
    if L_check is None:
        last = tree.vertex_distances[-1] if tree.vertex_distances else 1.0
        L_check = max(2.0 * last, start + 1.0)
    if not L_check > start:
        raise ValueError("L_check must exceed t_k")
    sups, infs, _ = _piece_ratios(tree, k, alpha, start, L_check)
    upper = float(sups.max())
    lower = float(infs.min())
    tail_exact = _matches_geometric(tree, d)
    if tail_exact:
        b = float(tree.branching_numbers[-1])
        upper = max(upper, b ** (-k))
        lower = min(lower, b ** (-k - 1))
    elif alpha > 0 or not tree.is_half_line:
        _check_growth(tree, k, alpha, L_check)
    return Envelope(k, lower, upper, alpha, start, L_check, tail_exact)


def power_lower_constant(tree: RegularTree, d: float) -> float:
    """Largest ``a`` with ``a t^(d-1) <= g_0(t)`` for all ``t > 0``.

    On each piece ``g_0`` is constant and ``t^(d-1)`` increasing, so the
    infimum is attained at the right ends of the pieces.
    """
    alpha = d - 1.0
    if alpha == 0:
        return 1.0
    if tree.is_half_line:
        raise UnboundedRatioError("g_0 == 1 is not bounded below by a t^(d-1) with d > 1")
    if tree.geometric_ratio is not None:
        if not _matches_geometric(tree, d):
            raise UnboundedRatioError("geometric tree does not realize dimension d")
        n = tree.generations
        vals = [tree.product(j) / tree.distance(j + 1) ** alpha for j in range(n + 1)]
        # beyond the stored generations every piece gives exactly 1/b
        vals.append(1.0 / tree.branching_numbers[-1])
        return float(min(vals))
    raise UnboundedRatioError(
        "an explicit tree stops branching, so g_0 / t^(d-1) -> 0 for d > 1"
    )
