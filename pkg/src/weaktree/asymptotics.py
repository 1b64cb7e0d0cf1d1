"""Coupling sweeps: weak-coupling laws, sandwich bounds, the ``d = 2`` and
``d > 2`` regimes and the strong-coupling Weyl count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .decomposition import build_channels, choose_k_max
from .direct import build_graph_matrix, direct_count
from .errors import SandwichViolationError, UnconvergedError, WeakTreeError
from .halfline import Channel, Numerics, PowerWeight, channel_grid, count_negative, solve_channel
from .potentials import modified_potential, moment, weighted_integral
from .special import gamma_fn
from .birman_schwinger import cor1_bound
from .tree import RegularTree, TreeWeight, envelope_constants

__all__ = [
    "SweepRecord",
    "SweepReport",
    "SandwichResult",
    "SupercriticalReport",
    "WeylReport",
    "log_grid",
    "weak_sweep_fit",
    "sandwich_check",
    "d2_fit",
    "supercritical_check",
    "weyl_constant",
    "weyl_check",
]

SANDWICH_RTOL = 1e-9


def log_grid(lo: float, hi: float, points: Optional[int] = None, per_decade: int = 8) -> list:
    """Log-spaced couplings; by default 8 points per decade."""
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    if points is None:
        points = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return [float(x) for x in np.geomspace(lo, hi, points)]


@dataclass
class SweepRecord:
    lam: float
    E1: float
    E_minus: float = math.nan
    E_plus: float = math.nan
    N_minus: int = 0
    bound_cor1: float = math.nan
    certified_channels: int = 0
    bracket_width: float = math.nan

    @property
    def reliable(self) -> bool:
        return bool(self.bracket_width < 1e-3)


@dataclass
class SweepReport:
    """Records of a coupling sweep with the fitted law and the verdict."""

    records: list
    kind: str
    slope: float = math.nan
    slope_stderr: float = math.nan
    intercept: float = math.nan
    r2: float = math.nan
    expected_slope: float = math.nan
    verdict: str = ""
    passed: bool = False
    violations: int = 0
    fit_lambdas: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "records"}
        out["records"] = [asdict(r) for r in self.records]
        return out


def _map(fn, items, workers):
    """Ordered map, optionally on a thread pool; results do not depend on ``workers``."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, icpt = coef
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    n = len(x)
    if n > 2:
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = math.sqrt(ss_res / (n - 2) / sxx) if sxx > 0 else math.nan
    else:
        stderr = math.nan
    return float(slope), float(icpt), r2, stderr


def _channel0(tree, V, lam):
    return Channel(0, 0.0, TreeWeight(tree, 0), "neumann", lam, V, 1)


@dataclass
class SandwichResult:
    E_minus: float
    E: float
    E_plus: float
    C1: float
    C2: float
    envelope_lower: float
    envelope_upper: float

    @property
    def ordered(self) -> bool:
        tol = SANDWICH_RTOL * abs(self.E)
        return self.E_minus <= self.E + tol and self.E <= self.E_plus + tol


def sandwich_check(
    tree: RegularTree, V, d: float, lam: float, numerics: Numerics = Numerics(),
    E: Optional[float] = None,
) -> SandwichResult:
    """Lowest eigenvalues of the comparison operators around ``E_{1,0}``.

    The comparison operators use the weight ``(1+t)^(d-1)`` and the modified
    potentials ``V_0^-`` and ``V_0^+``.  With ``X = (lam |int V g_0|)^(2/(2-d))``
    the empirical constants are ``C1 = |E^+|/X <= |E|/X <= C2 = |E^-|/X``.
    Raises ``SandwichViolationError`` if ``E^- <= E <= E^+`` fails.
    """
    env = envelope_constants(tree, 0, d)
    alpha = d - 1.0
    vm = modified_potential(V, tree, 0, d, env, -1)
    vp = modified_potential(V, tree, 0, d, env, +1)
    w = PowerWeight(1.0, alpha)
    em = solve_channel(Channel(0, 0.0, w, "neumann", lam, vm), numerics).lowest
    ep = solve_channel(Channel(0, 0.0, w, "neumann", lam, vp), numerics).lowest
    if E is None:
        E = solve_channel(_channel0(tree, V, lam), numerics).lowest
    mass = moment(V, 0.0, "g0", tree=tree)
    X = abs(lam * mass) ** (2.0 / (2.0 - d)) if d < 2 else math.nan
    res = SandwichResult(em, E, ep, abs(ep) / X, abs(em) / X, env.lower, env.upper)
    if not res.ordered:
        raise SandwichViolationError(
            f"sandwich violated at lambda={lam:g}: E-={em:.6e}, E={E:.6e}, E+={ep:.6e}"
        )
    return res


def _tree_count(tree, V, lam, d, numerics, E_res):
    """Total negative count and the channel cutoff used to certify it."""
    n = E_res.count
    try:
        K = choose_k_max(tree, V, lam, d)
    except (ValueError, WeakTreeError):
        return n, -1
    for ch in build_channels(tree, V, lam, d, K)[1:]:
        grid = channel_grid(ch, max(2.0 * ch.support_end(), ch.start + 20.0), numerics)
        n += ch.multiplicity * count_negative(ch, grid, 0.0)
    return n, K


def weak_sweep_fit(
    tree: RegularTree, V, d: float, lams: Sequence[float], numerics: Numerics = Numerics(),
    *, sandwich: bool = True, workers: int = 1,
) -> SweepReport:
    """Fit ``log|E_1|`` against ``log lambda``; the law predicts slope ``2/(2-d)``."""
    if not 1.0 <= d < 2.0:
        raise ValueError("the power law needs 1 <= d < 2")
    lams = sorted(lams)
    mass = moment(V, 0.0, "g0", tree=tree)
    expected = 2.0 / (2.0 - d)
    records = []
    if mass > 0:
        for lam in lams:
            ch = _channel0(tree, V, lam)
            grid = channel_grid(ch, max(2.0 * ch.support_end(), 20.0), numerics)
            records.append(SweepRecord(lam, math.nan, N_minus=count_negative(ch, grid, 0.0)))
        empty = all(r.N_minus == 0 for r in records[:1])
        verdict = "empty spectrum at weak coupling" if empty else "negative eigenvalue at weak coupling"
        return SweepReport(records, "weak", expected_slope=expected, verdict=verdict,
                           passed=empty, extra={"mass": mass})
    def one(lam):
        res = solve_channel(_channel0(tree, V, lam), numerics)
        if not res.eigenvalues:
            raise UnconvergedError(f"no negative eigenvalue found at lambda={lam:g}")
        rec = SweepRecord(lam, res.lowest, bracket_width=res.bracket_width)
        rec.N_minus, rec.certified_channels = _tree_count(tree, V, lam, d, numerics, res)
        try:
            rec.bound_cor1 = cor1_bound(V, tree, d, lam)[0]
        except WeakTreeError:
            pass
        if sandwich:
            sw = sandwich_check(tree, V, d, lam, numerics, E=res.lowest)
            rec.E_minus, rec.E_plus = sw.E_minus, sw.E_plus
        return rec

    records = _map(one, lams, workers)
    use = [r for r in records if r.reliable and r.lam <= records[0].lam * 10.0 * (1 + 1e-12)]
    if len(use) < 3:
        use = records
    slope, icpt, r2, stderr = _fit([math.log(r.lam) for r in use], [math.log(-r.E1) for r in use])
    passed = abs(slope - expected) <= 0.05 * expected
    verdict = f"slope {slope:.4f} vs {expected:.4f}: " + ("pass" if passed else "fail")
    extra = {"mass": mass, "prefactor": math.exp(icpt)}
    if sandwich:
        X = [abs(r.lam * mass) ** expected for r in records]
        extra["C1"] = [abs(r.E_plus) / x for r, x in zip(records, X)]
        extra["C2"] = [abs(r.E_minus) / x for r, x in zip(records, X)]
    return SweepReport(records, "weak", slope, stderr, icpt, r2, expected, verdict, passed, 0,
                       [r.lam for r in use], extra)


def d2_fit(
    tree: RegularTree, V, lams: Sequence[float], numerics: Numerics = Numerics(), workers: int = 1
) -> SweepReport:
    """Regress ``ln|E_1|`` on ``1/lambda``; pass when ``R^2 >= 0.99`` and the slope is negative."""
    lams = sorted(lams)
    mass = moment(V, 0.0, "g0", tree=tree)

    def one(lam):
        try:
            res = solve_channel(_channel0(tree, V, lam), numerics)
        except UnconvergedError:
            return None
        E = res.lowest if res.eigenvalues else math.nan
        return SweepRecord(lam, E, N_minus=res.count, bracket_width=res.bracket_width)

    out = _map(one, lams, workers)
    records = [r for r in out if r is not None]
    failed = [lam for lam, r in zip(lams, out) if r is None]
    good = [r for r in records if r.E1 < 0]
    extra = {"mass": mass, "unconverged": failed}
    if mass > 0 or len(good) < 3:
        empty = all(r.N_minus == 0 for r in records)
        verdict = "no negative eigenvalues found" if empty else "too few eigenvalues to fit"
        return SweepReport(records, "d2", verdict=verdict, passed=False, extra=extra)
    slope, icpt, r2, stderr = _fit([1.0 / r.lam for r in good], [math.log(-r.E1) for r in good])
    passed = r2 >= 0.99 and slope < 0
    extra["reliable_range"] = [good[0].lam, good[-1].lam]
    verdict = f"R^2 {r2:.5f}, slope {slope:.4f}: " + ("pass" if passed else "fail")
    return SweepReport(records, "d2", slope, stderr, icpt, r2, math.nan, verdict, passed,
                       0, [r.lam for r in good], extra)


@dataclass
class SupercriticalReport:
    lambda_star: float
    first_nonempty: float
    counts: list
    moment_d2: float
    passed: bool
    bisection_steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _count_channel0(tree, V, lam, numerics):
    ch = _channel0(tree, V, lam)
    grid = channel_grid(ch, max(2.0 * ch.support_end(), 20.0), numerics)
    return count_negative(ch, grid, 0.0)


def supercritical_check(
    tree: RegularTree, V, lams: Sequence[float], numerics: Numerics = Numerics(),
    d: Optional[float] = None, bisection_steps: int = 30,
) -> SupercriticalReport:
    """Largest ``lambda*`` with no negative spectrum for all grid ``lambda <= lambda*``.

    Emptiness of channel 0 is the emptiness of the whole tree operator
    (the ground state always lives in channel 0).  ``lambda*`` is refined by
    log-bisection towards the first nonempty grid point.
    """
    d = tree.declared_dimension if d is None else d
    if d is None or not d > 2:
        raise ValueError("supercritical_check needs d > 2")
    end = V.support_end()
    bps = list(V.breakpoints(0.0, end)) + tree.vertices_between(0.0, end)
    mom, _ = weighted_integral(
        lambda t: abs(float(V(t))) ** (d / 2.0) * float(tree.g(0, t)), bps, 0.0, end, decays=V.decays
    )
    lams = sorted(lams)
    counts = []
    star = 0.0
    first = math.nan
    for lam in lams:
        try:
            n = _count_channel0(tree, V, lam, numerics)
        except UnconvergedError:
            n = None
        counts.append([lam, n])
        if n == 0 and math.isnan(first):
            star = lam
        elif math.isnan(first):
            first = lam
    steps = 0
    if star > 0 and not math.isnan(first):
        lo, hi = star, first
        for steps in range(1, bisection_steps + 1):
            mid = math.sqrt(lo * hi)
            try:
                n = _count_channel0(tree, V, mid, numerics)
            except UnconvergedError:
                break
            if n == 0:
                lo = mid
            else:
                hi = mid
            if hi / lo < 1 + 1e-6:
                break
        star = lo
        first = hi
    passed = star > 0 and not math.isnan(first)
    return SupercriticalReport(star, first, counts, mom, passed, steps)


def weyl_constant(gamma: float = 0.0) -> float:
    """``Gamma(gamma+1) / (2 sqrt(pi) Gamma(gamma+3/2))``; equals ``1/pi`` at 0."""
    return gamma_fn(gamma + 1.0) / (2.0 * math.sqrt(math.pi) * gamma_fn(gamma + 1.5))


@dataclass
class WeylReport:
    records: list
    integral: float

    @property
    def ratios(self) -> list:
        return [r["ratio"] for r in self.records]

    def to_dict(self) -> dict:
        return {"integral": self.integral, "records": self.records}


def weyl_check(
    tree: RegularTree, V, lams: Sequence[float], *, L: Optional[float] = None,
    h: Optional[float] = None, cap: int = 200_000,
) -> WeylReport:
    """Ratio of ``N_-(A_lambda)`` to ``sqrt(lambda)/pi int |V|^(1/2) g_0 dt``.

    Counts come from the direct truncated tree (Dirichlet at the cut, with
    the Neumann count reported as the upper bracket).
    """
    end = V.support_end()
    if not math.isfinite(end):
        raise ValueError("the Weyl check needs a compactly supported potential")
    if L is None:
        L = 1.5 * end
    G = len([x for x in tree.vertices_between(0.0, L)])
    bps = list(V.breakpoints(0.0, end)) + tree.vertices_between(0.0, end)
    integral, _ = weighted_integral(
        lambda t: math.sqrt(abs(float(V(t)))) * float(tree.g(0, t)), bps, 0.0, end
    )
    lcl = weyl_constant(0.0)
    out = []
    for lam in sorted(lams):
        step = h if h is not None else min(0.01, 0.2 / math.sqrt(lam * max(V.bound, 1e-300)))
        Md = build_graph_matrix(tree, V, lam, G, step, L, cap=cap)
        Mn = build_graph_matrix(tree, V, lam, G, step, L, cap=cap, leaf_boundary="neumann")
        nd, nn = direct_count(Md), direct_count(Mn)
        pred = math.sqrt(lam) * lcl * integral
        out.append({"lambda": lam, "N_dirichlet": nd, "N_neumann": nn, "prediction": pred,
                    "ratio": nd / pred, "h": step})
    return WeylReport(out, integral)
