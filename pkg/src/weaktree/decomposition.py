"""Reduction of the tree operator to an orthogonal sum of half-line channels.

Channel 0 lives on ``(0, inf)`` with weight ``g_0`` and the natural boundary
condition at the root.  Channel ``k >= 1`` lives on ``(t_k, inf)`` with weight
``g_k``, a Dirichlet condition at ``t_k`` and multiplicity
``b_1...b_{k-1}(b_k - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import CutoffNotFoundError
from .halfline import Channel, EigResult, Numerics, solve_channel
from .potentials import modified_potential, weighted_integral
from .special import spectral_constants
from .tree import RegularTree, TreeWeight, envelope_constants, multiplicity

__all__ = [
    "SpectrumEntry",
    "TreeSpectrum",
    "build_channels",
    "assemble_negative_spectrum",
    "choose_k_max",
    "channel_bound",
    "compare_spectra",
    "MARGINAL",
]

MARGINAL = 1e-6


def build_channels(tree: RegularTree, V, lam: float, d: float, k_max: int) -> list:
    """Channels ``0..k_max`` of the decomposition; absent channels are skipped."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    out = [Channel(0, 0.0, TreeWeight(tree, 0), "neumann", lam, V, 1)]
    for k in range(1, k_max + 1):
        tk = tree.distance(k)
        if not math.isfinite(tk):
            break
        m = multiplicity(tree, k)
        if m == 0:
            continue
        out.append(Channel(k, tk, TreeWeight(tree, k), "dirichlet", lam, V, m))
    return out


@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    multiplicity: int
    channels: tuple


@dataclass
class TreeSpectrum:
    """Negative spectrum of the tree operator assembled from channels."""

    entries: list
    channel_results: dict = field(default_factory=dict)
    multiplicities: dict = field(default_factory=dict)

    @property
    def eigenvalues(self) -> list:
        """Sorted multiset of negative eigenvalues."""
        out = []
        for e in self.entries:
            out.extend([e.value] * e.multiplicity)
        return out

    @property
    def count(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    @property
    def contributing(self) -> tuple:
        return tuple(sorted(k for k, r in self.channel_results.items() if r.eigenvalues))

    @property
    def only_channel_zero(self) -> bool:
        return self.contributing in ((), (0,))

    @property
    def marginal(self) -> list:
        return [v for v in self.eigenvalues if -MARGINAL < v < 0]

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues,
            "count": self.count,
            "contributing_channels": list(self.contributing),
            "only_channel_zero": self.only_channel_zero,
            "channels": {
                str(k): {
                    "multiplicity": self.multiplicities[k],
                    "eigenvalues": list(r.eigenvalues),
                    "truncation_L": r.grid.L if r.grid is not None else None,
                }
                for k, r in sorted(self.channel_results.items())
            },
        }


def _merge(pairs, rel: float = 1e-8):
    """Group ``(value, multiplicity, k)`` triples whose values coincide."""
    pairs = sorted(pairs)
    entries = []
    for v, m, k in pairs:
        if entries and abs(v - entries[-1][0]) <= rel * max(1.0, abs(v)):
            last = entries[-1]
            entries[-1] = (last[0], last[1] + m, last[2] + (k,))
        else:
            entries.append((v, m, (k,)))
    return [SpectrumEntry(v, m, ks) for v, m, ks in entries]


def assemble_negative_spectrum(channels: Sequence[Channel], numerics: Numerics = Numerics()):
    """Union of channel spectra, each eigenvalue repeated ``m_k`` times."""
    results = {}
    mults = {}
    triples = []
    for ch in channels:
        res: EigResult = solve_channel(ch, numerics)
        results[ch.k] = res
        mults[ch.k] = ch.multiplicity
        triples.extend((v, ch.multiplicity, ch.k) for v in res.eigenvalues)
    return TreeSpectrum(_merge(triples), results, mults)


def channel_bound(tree: RegularTree, V, lam: float, d: float, k: int) -> float:
    """Trace bound ``lam K(d) int_0^inf s |V_k^-(s + t_k)|_- ds`` for channel ``k``.

    Only the attractive part of ``V_k^-`` enters.  A value below 1 certifies
    that channel ``k`` has no negative eigenvalues.
    """
    tk = tree.distance(k)
    end = V.support_end()
    if tk >= end or lam == 0:
        return 0.0
    env = envelope_constants(tree, k, d)
    vm = modified_potential(V, tree, k, d, env, -1)
    kt = spectral_constants(d).K_tilde if d < 2 else math.inf

    def f(s):
        return s * max(-float(vm(s + tk)), 0.0)

    bps = [b - tk for b in vm.breakpoints(tk, end)]
    val, _ = weighted_integral(f, bps, 0.0, end - tk, decays=vm.decays)
    if val == 0.0:
        return 0.0
    return lam * kt * val


def choose_k_max(tree: RegularTree, V, lam: float, d: float, cap: int = 64) -> int:
    """Largest channel index not certified empty by :func:`channel_bound`.

    Channels beyond the returned ``K`` all have a bound below 1 (so they
    carry no negative eigenvalues); channels starting beyond the effective
    support of ``V`` have bound 0 and end the scan.
    """
    if not 1.0 <= d < 2.0:
        raise ValueError("the trace bound needs 1 <= d < 2")
    end = V.support_end()
    K = 0
    k = 1
    while True:
        tk = tree.distance(k)
        if not math.isfinite(tk) or tk >= end:
            return K
        if k > cap:
            raise CutoffNotFoundError(f"channel bounds still >= 1 beyond k={cap}")
        if multiplicity(tree, k) > 0 and channel_bound(tree, V, lam, d, k) >= 1.0:
            K = k
        k += 1


def compare_spectra(a: Sequence[float], b: Sequence[float], rel_tol: float = 1e-4):
    """Compare two multisets of eigenvalues, ignoring marginal ones.

    Returns ``(match, max_rel_diff)``.
    """
    a = sorted(v for v in a if v <= -MARGINAL)
    b = sorted(v for v in b if v <= -MARGINAL)
    if len(a) != len(b):
        return False, math.inf
    if not a:
        return True, 0.0
    diff = max(abs(x - y) / abs(y) for x, y in zip(a, b))
    return bool(diff <= rel_tol), float(diff)
