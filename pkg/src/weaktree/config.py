"""INI-style run configuration.

Schema (all keys optional unless noted)::

    [tree]
    kind = geometric | terminal | explicit | halfline    (required)
    d = 1.5                  ; geometric
    b = 2                    ; geometric: int, terminal/explicit: list "2, 2"
    t = 1, 2                 ; terminal/explicit vertex distances
    generations = 20         ; geometric: stored generations

    [potential]              ; repeat as [potential:2], ... to add terms
    kind = well | gaussian | exp_poly
    depth = -1  lo = 0  hi = 1            ; well
    amplitude = -1  width = 1  center = 0 ; gaussian
    coeffs = -1, 0.5  rate = 1  lo = 0    ; exp_poly

    [analysis]
    d = 1.5                  ; defaults to the tree's dimension
    lambda = 0.01
    k_max = auto | int

    [numerics]
    h, L, auto_truncate, richardson, growth, h_max_factor, bracket_tol, right

    [sweep]
    lambdas = 0.001, 0.002   ; or lambda_min, lambda_max, points
    kappas = 0.5, 0.1, 0.02

    [direct]
    generations, L, h, cap
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass, field
from typing import Optional

from .asymptotics import log_grid
from .errors import ConfigError
from .halfline import Numerics
from .potentials import RadialPotential, exp_poly, gaussian_well, square_well
from .tree import RegularTree, make_geometric_tree, make_half_line, make_terminal_tree

__all__ = ["RunConfig", "load_config", "parse_config"]

_KNOWN = {
    "tree": {"kind", "d", "b", "t", "generations"},
    "potential": {"kind", "depth", "lo", "hi", "amplitude", "width", "center", "coeffs", "rate"},
    "analysis": {"d", "lambda", "k_max"},
    "numerics": {"h", "l", "auto_truncate", "richardson", "growth", "h_max_factor",
                 "bracket_tol", "right"},
    "sweep": {"lambdas", "lambda_min", "lambda_max", "points", "kappas"},
    "direct": {"generations", "l", "h", "cap"},
}


@dataclass
class RunConfig:
    tree: RegularTree
    potential: RadialPotential
    d: float
    lam: Optional[float]
    k_max: Optional[int]
    numerics: Numerics
    lambdas: list
    kappas: list
    direct: dict
    resolved: dict = field(default_factory=dict)


class _Reader:
    """Typed access to a parsed INI with line numbers for diagnostics."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(self._where(line, None) + str(exc).splitlines()[0]) from exc
        self.lines = {}
        section = None
        for no, raw in enumerate(text.splitlines(), start=1):
            s = raw.strip()
            m = re.match(r"^\[([^\]]+)\]", s)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = no
                continue
            m = re.match(r"^([^=:;#\s][^=:]*?)\s*[=:]", s)
            if m and section is not None:
                self.lines[(section, m.group(1).strip().lower())] = no

    def _where(self, line, field_):
        loc = f"{self.source}"
        if line:
            loc += f":{line}"
        if field_:
            loc += f": {field_}"
        return loc + ": "

    def fail(self, section, key, msg):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        raise ConfigError(self._where(line, f"[{section}] {key}" if key else f"[{section}]") + msg)

    def has(self, section, key):
        return self.cp.has_section(section) and self.cp.has_option(section, key)

    def raw(self, section, key, default=None, required=False):
        if self.has(section, key):
            return self.cp.get(section, key).strip()
        if required:
            self.fail(section, key, "missing required field")
        return default

    def float(self, section, key, default=None, required=False, positive=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        try:
            x = float(v)
        except ValueError:
            self.fail(section, key, f"expected a number, got {v!r}")
        if not math.isfinite(x):
            self.fail(section, key, f"expected a finite number, got {v!r}")
        if positive and x <= 0:
            self.fail(section, key, f"must be positive, got {v}")
        return x

    def int(self, section, key, default=None, required=False, minimum=None):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        try:
            x = int(v)
        except ValueError:
            self.fail(section, key, f"expected an integer, got {v!r}")
        if minimum is not None and x < minimum:
            self.fail(section, key, f"must be >= {minimum}, got {x}")
        return x

    def bool(self, section, key, default):
        if not self.has(section, key):
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            self.fail(section, key, f"expected true/false, got {self.raw(section, key)!r}")

    def floats(self, section, key, default=None):
        v = self.raw(section, key)
        if v is None:
            return default
        try:
            return [float(x) for x in v.replace(",", " ").split()]
        except ValueError:
            self.fail(section, key, f"expected a list of numbers, got {v!r}")


def _check_keys(r: _Reader):
    for sec in r.cp.sections():
        base = sec.split(":")[0].strip()
        if base not in _KNOWN:
            r.fail(sec, None, f"unknown section (known: {', '.join(sorted(_KNOWN))})")
        for key in r.cp.options(sec):
            if key not in _KNOWN[base]:
                r.fail(sec, key, "unknown field")


def _tree(r: _Reader) -> tuple:
    if not r.cp.has_section("tree"):
        r.fail("tree", None, "missing section")
    kind = r.raw("tree", "kind", required=True).lower()
    if kind == "geometric":
        d = r.float("tree", "d", required=True)
        if not 1 < d:
            r.fail("tree", "d", "geometric trees need d > 1")
        b = r.int("tree", "b", 2, minimum=2)
        gens = r.int("tree", "generations", None, minimum=1)
        return make_geometric_tree(d, b, gens), {"kind": kind, "d": d, "b": b, "generations": gens}
    if kind in ("terminal", "explicit"):
        t = r.floats("tree", "t")
        if t is None:
            r.fail("tree", "t", "missing required field")
        b = r.floats("tree", "b")
        if b is None:
            r.fail("tree", "b", "missing required field")
        if any(x != int(x) for x in b):
            r.fail("tree", "b", "branching numbers must be integers")
        b = [int(x) for x in b]
        if len(b) != len(t):
            r.fail("tree", "t", f"{len(t)} distances for {len(b)} branching numbers")
        try:
            if kind == "terminal":
                tree = make_terminal_tree(b, t)
            else:
                tree = RegularTree(tuple(t), tuple(b))
        except ValueError as exc:
            r.fail("tree", "t", str(exc))
        return tree, {"kind": kind, "b": b, "t": t}
    if kind == "halfline":
        return make_half_line(), {"kind": kind}
    r.fail("tree", "kind", f"unknown tree kind {kind!r}")


def _potential(r: _Reader) -> tuple:
    secs = [s for s in r.cp.sections() if s.split(":")[0].strip() == "potential"]
    if not secs:
        r.fail("potential", None, "missing section")
    total = None
    echo = []
    for sec in secs:
        kind = r.raw(sec, "kind", required=True).lower()
        if kind == "well":
            p = {"depth": r.float(sec, "depth", -1.0), "lo": r.float(sec, "lo", 0.0),
                 "hi": r.float(sec, "hi", 1.0)}
            if not 0 <= p["lo"] < p["hi"]:
                r.fail(sec, "hi", "need 0 <= lo < hi")
            V = square_well(p["depth"], p["lo"], p["hi"])
        elif kind == "gaussian":
            p = {"amplitude": r.float(sec, "amplitude", -1.0),
                 "width": r.float(sec, "width", 1.0, positive=True),
                 "center": r.float(sec, "center", 0.0)}
            V = gaussian_well(p["amplitude"], p["width"], p["center"])
        elif kind == "exp_poly":
            coeffs = r.floats(sec, "coeffs")
            if not coeffs:
                r.fail(sec, "coeffs", "missing required field")
            p = {"coeffs": coeffs, "rate": r.float(sec, "rate", 1.0, positive=True),
                 "lo": r.float(sec, "lo", 0.0)}
            V = exp_poly(coeffs, p["rate"], lo=p["lo"])
        else:
            r.fail(sec, "kind", f"unknown potential kind {kind!r}")
        p["kind"] = kind
        echo.append(p)
        total = V if total is None else total + V
    return total, echo


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text; raises ``ConfigError``."""
    r = _Reader(text, source)
    _check_keys(r)
    tree, tree_echo = _tree(r)
    V, pot_echo = _potential(r)

    d = r.float("analysis", "d", tree.declared_dimension)
    if d is None:
        r.fail("analysis", "d", "tree has no declared dimension; set d")
    if d < 1:
        r.fail("analysis", "d", "must be >= 1")
    lam = r.float("analysis", "lambda", None, positive=True)
    km = r.raw("analysis", "k_max", "auto")
    if km.lower() == "auto":
        k_max = None
    else:
        k_max = r.int("analysis", "k_max", minimum=0)

    right = (r.raw("numerics", "right", "dirichlet") or "").lower()
    if right not in ("dirichlet", "neumann"):
        r.fail("numerics", "right", "must be dirichlet or neumann")
    num = Numerics(
        h=r.float("numerics", "h", 0.02, positive=True),
        L=r.float("numerics", "l", None, positive=True),
        auto_truncate=r.bool("numerics", "auto_truncate", True),
        richardson=r.bool("numerics", "richardson", False),
        growth=r.float("numerics", "growth", 1.02),
        h_max_factor=r.float("numerics", "h_max_factor", 0.02, positive=True),
        bracket_tol=r.float("numerics", "bracket_tol", 1e-4, positive=True),
        right=right,
    )
    if num.growth < 1:
        r.fail("numerics", "growth", "must be >= 1")
    if not num.auto_truncate and num.L is None:
        r.fail("numerics", "auto_truncate", "a fixed truncation needs L")

    lams = r.floats("sweep", "lambdas")
    if lams is None and r.has("sweep", "lambda_min"):
        lo = r.float("sweep", "lambda_min", positive=True)
        hi = r.float("sweep", "lambda_max", required=True, positive=True)
        if not hi > lo:
            r.fail("sweep", "lambda_max", "must exceed lambda_min")
        pts = r.int("sweep", "points", None, minimum=2)
        lams = log_grid(lo, hi, pts)
    lams = lams or []
    if any(x <= 0 for x in lams):
        r.fail("sweep", "lambdas", "couplings must be positive")
    kappas = r.floats("sweep", "kappas", [0.5, 0.1, 0.02])

    direct = {
        "generations": r.int("direct", "generations", None, minimum=0),
        "L": r.float("direct", "l", None, positive=True),
        "h": r.float("direct", "h", None, positive=True),
        "cap": r.int("direct", "cap", 200_000, minimum=1),
    }
    resolved = {
        "tree": tree_echo,
        "potential": pot_echo,
        "analysis": {"d": d, "lambda": lam, "k_max": "auto" if k_max is None else k_max},
        "numerics": asdict(num),
        "sweep": {"lambdas": lams, "kappas": kappas},
        "direct": direct,
    }
    return RunConfig(tree, V, d, lam, k_max, num, lams, kappas, direct, resolved)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    return parse_config(text, source=path)
