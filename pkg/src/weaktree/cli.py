"""Command-line entry point.

Every subcommand reads an INI config (see :mod:`weaktree.config`), writes
``<command>.json`` into the output directory and, for sweeps, a CSV of the
records.  Exit status: 0 on success, 2 when the computed verdict fails, 1 on
any error (the JSON then carries an ``error`` object).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .asymptotics import d2_fit, supercritical_check, weak_sweep_fit, weyl_check
from .birman_schwinger import (
    b0_channel,
    bargmann_bound,
    channel_threshold,
    cor1_bound,
    critical_case_eigenvalue,
    hs_convergence,
    solve_weak_eigenvalue,
)
from .config import RunConfig, load_config
from .decomposition import (
    assemble_negative_spectrum,
    build_channels,
    choose_k_max,
    compare_spectra,
)
from .direct import build_graph_matrix, direct_negative_spectrum
from .errors import ConfigError, WeakTreeError
from .halfline import Channel, Numerics, PowerWeight, channel_grid, count_negative, solve_channel
from .potentials import moment
from .report import records_csv, svg_from_csv, write_json
from .tree import TreeWeight, dimension_estimate, envelope_constants, multiplicity

__all__ = ["main", "run"]

COMMANDS = ("tree-info", "spectrum", "weak-sweep", "bs-solve", "bounds", "d2-sweep",
            "supercritical", "weyl")


class _Result:
    def __init__(self, result: dict, passed: bool = True, verdict: str = "ok",
                 csv: Optional[str] = None, svg: Optional[str] = None):
        self.result = result
        self.passed = passed
        self.verdict = verdict
        self.csv = csv
        self.svg = svg


def _need_lambda(cfg: RunConfig) -> float:
    if cfg.lam is None:
        raise ConfigError("[analysis] lambda: missing required field")
    return cfg.lam


def _need_lambdas(cfg: RunConfig) -> list:
    if not cfg.lambdas:
        raise ConfigError("[sweep] lambdas: missing (give lambdas or lambda_min/lambda_max)")
    return cfg.lambdas


def _safe(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs), None
    except (WeakTreeError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _count(ch: Channel, numerics: Numerics) -> int:
    L = max(2.0 * ch.support_end(), ch.start + 20.0)
    return count_negative(ch, channel_grid(ch, L, numerics), 0.0)


def cmd_tree_info(cfg: RunConfig, args) -> _Result:
    tree, V, d = cfg.tree, cfg.potential, cfg.d
    n_show = tree.generations if tree.geometric_ratio is None else min(tree.generations, 8)
    info = {
        "vertex_distances": [tree.distance(k) for k in range(1, n_show + 1)],
        "branching_numbers": [tree.branching(k) for k in range(1, n_show + 1)],
        "multiplicities": [1] + [multiplicity(tree, k) for k in range(1, n_show + 1)],
        "declared_dimension": tree.declared_dimension,
    }
    pts = tree.vertices_between(0.0, math.inf)[:16]
    if len(pts) >= 4:
        info["dimension_estimate"] = dimension_estimate(tree, pts[0], pts[-1])
        info["dimension_window"] = [pts[0], pts[-1]]
    else:
        info["dimension_estimate"] = None
        info["dimension_note"] = f"only {len(pts)} generations; need at least 4"
    envs = {}
    for k in range(0, min(3, n_show) + 1):
        env, err = _safe(envelope_constants, tree, k, d)
        envs[str(k)] = {"error": err} if err else {
            "lower": env.lower, "upper": env.upper, "exponent": env.exponent,
            "valid_from": env.valid_from, "checked_to": env.checked_to, "tail_exact": env.tail_exact,
        }
    info["envelopes"] = envs
    mom = {}
    mom["int_V_g0"], err = _safe(moment, V, 0.0, "g0", tree=tree)
    mom["int_t_absV"], _ = _safe(moment, V, 1.0, "t_power", absolute=True)
    if err:
        mom["error"] = err
    info["moments"] = mom
    return _Result(info)


def cmd_spectrum(cfg: RunConfig, args) -> _Result:
    tree, V, d = cfg.tree, cfg.potential, cfg.d
    lam = _need_lambda(cfg)
    out = {}
    if args.compare_direct:
        L = cfg.direct["L"] or cfg.numerics.L
        if L is None:
            raise ConfigError("[direct] L: required with --compare-direct")
        h = cfg.direct["h"] or cfg.numerics.h
        G = len(tree.vertices_between(0.0, L * (1 - 1e-12)))
        if cfg.direct["generations"] is not None:
            G = min(G, cfg.direct["generations"])
        numerics = Numerics(h=h, L=L, auto_truncate=False, right="dirichlet")
        channels = build_channels(tree, V, lam, d, G)
        spec = assemble_negative_spectrum(channels, numerics)
        M = build_graph_matrix(tree, V, lam, G, h, L, cap=cfg.direct["cap"])
        direct = direct_negative_spectrum(M, max(spec.count, 1) + 2)
        match, diff = compare_spectra(spec.eigenvalues, direct.eigenvalues)
        out.update(spec.to_dict())
        out["k_max"] = G
        out["direct"] = {"eigenvalues": list(direct.eigenvalues), "count": direct.count,
                         "dimension": M.dimension, "L": L, "h": h, "generations": G}
        out["match"] = match
        out["max_rel_diff"] = diff
        verdict = f"match: {str(match).lower()}, max_rel_diff {diff:.3e}"
        return _Result(out, match, verdict)
    if cfg.k_max is not None:
        K = cfg.k_max
        out["k_max_source"] = "config"
    elif 1.0 <= d < 2.0:
        K = choose_k_max(tree, V, lam, d)
        out["k_max_source"] = "trace bound"
    else:
        raise ConfigError("[analysis] k_max: required when d >= 2 (no automatic cutoff)")
    spec = assemble_negative_spectrum(build_channels(tree, V, lam, d, K), cfg.numerics)
    out.update(spec.to_dict())
    out["k_max"] = K
    return _Result(out, True, f"{spec.count} negative eigenvalues")


def cmd_weak_sweep(cfg: RunConfig, args) -> _Result:
    lams = _need_lambdas(cfg)
    rep = weak_sweep_fit(cfg.tree, cfg.potential, cfg.d, lams, cfg.numerics, workers=args.threads)
    csv_text = records_csv(rep.records)
    svg = None
    if args.svg and not math.isnan(rep.slope):
        svg = svg_from_csv(csv_text, (rep.slope, rep.intercept), title="weak coupling")
    return _Result(rep.to_dict(), rep.passed, rep.verdict, csv_text, svg)


def cmd_bs_solve(cfg: RunConfig, args) -> _Result:
    W, d = cfg.potential, cfg.d
    lam = _need_lambda(cfg)
    if not 1.0 <= d < 2.0:
        raise ConfigError("[analysis] d: bs-solve needs 1 <= d < 2")
    out = {}
    mass = moment(W, d - 1.0, "power")
    out["attractive_mass"] = mass
    if abs(mass) <= 1e-8 * max(1.0, moment(W, d - 1.0, "power", absolute=True)):
        crit = critical_case_eigenvalue(W, lam, d)
        sol = crit.solution
        out["critical"] = {"W0": crit.W0, "E_predicted": crit.E_predicted}
    else:
        sol = solve_weak_eigenvalue(W, lam, d)
    out["solution"] = sol.to_dict()
    fd = solve_channel(b0_channel(W, lam, d), cfg.numerics)
    kappa_fd = math.sqrt(-fd.lowest) if fd.eigenvalues else math.nan
    rel = abs(sol.kappa - kappa_fd) / kappa_fd if fd.eigenvalues else math.inf
    out["fd_check"] = {"E": fd.lowest if fd.eigenvalues else None, "kappa": kappa_fd,
                       "kappa_rel_diff": rel}
    hs = hs_convergence(W, d, cfg.kappas)
    out["hs_convergence"] = {"kappas": hs.kappas, "norms": hs.norms, "M0_norm": hs.m0_norm,
                             "decreasing": hs.decreasing, "nodes": hs.nodes}
    passed = rel <= 1e-3
    return _Result(out, passed, f"kappa rel diff {rel:.3e}: " + ("pass" if passed else "fail"))


def cmd_bounds(cfg: RunConfig, args) -> _Result:
    tree, V, d = cfg.tree, cfg.potential, cfg.d
    lam = _need_lambda(cfg)
    if not 1.0 <= d < 2.0:
        raise ConfigError("[analysis] d: counting bounds need 1 <= d < 2")
    out = {}
    bb = bargmann_bound(V, d, lam)
    n_dir = _count(Channel(0, 0.0, PowerWeight(1.0, d - 1.0, 0.0), "dirichlet", lam, V), cfg.numerics)
    out["bargmann"] = {"bound": bb, "certified_max": math.floor(bb), "count": n_dir}
    ok = n_dir <= bb
    c1, err = _safe(cor1_bound, V, tree, d, lam)
    if err:
        out["cor1"] = {"error": err}
    else:
        n0 = _count(Channel(0, 0.0, TreeWeight(tree, 0), "neumann", lam, V), cfg.numerics)
        out["cor1"] = {"bound": c1[0], "a": c1[1], "certified_max": math.floor(c1[0]), "count": n0}
        ok = ok and n0 <= c1[0]
    thresholds = {}
    end = V.support_end()
    k = 1
    while k <= 16 and tree.distance(k) < end:
        if multiplicity(tree, k) > 0:
            thresholds[str(k)], err = _safe(channel_threshold, tree, V, d, k)
        k += 1
    K, err = _safe(choose_k_max, tree, V, lam, d)
    out["cor2"] = {
        "thresholds": thresholds,
        "k_max": K,
        "only_channel_zero": K == 0,
    }
    if err:
        out["cor2"]["error"] = err
    return _Result(out, ok, "counts within bounds" if ok else "count exceeds a bound")


def cmd_d2_sweep(cfg: RunConfig, args) -> _Result:
    lams = _need_lambdas(cfg)
    rep = d2_fit(cfg.tree, cfg.potential, lams, cfg.numerics, workers=args.threads)
    csv_text = records_csv(rep.records)
    svg = svg_from_csv(csv_text, title="d = 2") if args.svg and rep.records else None
    return _Result(rep.to_dict(), rep.passed, rep.verdict, csv_text, svg)


def cmd_supercritical(cfg: RunConfig, args) -> _Result:
    lams = _need_lambdas(cfg)
    rep = supercritical_check(cfg.tree, cfg.potential, lams, cfg.numerics, d=cfg.d)
    verdict = (f"empty for lambda <= {rep.lambda_star:.6g}, nonempty at {rep.first_nonempty:.6g}"
               if rep.passed else "no empty/nonempty transition on the grid")
    return _Result(rep.to_dict(), rep.passed, verdict)


def cmd_weyl(cfg: RunConfig, args) -> _Result:
    lams = _need_lambdas(cfg)
    rep = weyl_check(cfg.tree, cfg.potential, lams, L=cfg.direct["L"], h=cfg.direct["h"],
                     cap=cfg.direct["cap"])
    passed = all(0.9 <= r <= 1.1 for r in rep.ratios)
    return _Result(rep.to_dict(), passed, "ratios " + ", ".join(f"{r:.4f}" for r in rep.ratios))


_DISPATCH = {
    "tree-info": cmd_tree_info,
    "spectrum": cmd_spectrum,
    "weak-sweep": cmd_weak_sweep,
    "bs-solve": cmd_bs_solve,
    "bounds": cmd_bounds,
    "d2-sweep": cmd_d2_sweep,
    "supercritical": cmd_supercritical,
    "weyl": cmd_weyl,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weaktree", description="Spectra of Schrodinger operators on radial trees.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    p.add_argument("--compare-direct", action="store_true",
                   help="spectrum: also solve the truncated tree directly and compare")
    p.add_argument("--svg", action="store_true", help="sweeps: also write a log-log SVG plot")
    return p


def run(command: str, config_path: str, out_dir: str, *, threads: int = 1,
        compare_direct: bool = False, svg: bool = False, stream=None) -> int:
    """Run one subcommand and write its reports; returns the exit status."""
    stream = sys.stdout if stream is None else stream
    args = argparse.Namespace(threads=max(1, threads), compare_direct=compare_direct, svg=svg)
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, command)
    payload = {"command": command, "version": __version__}
    try:
        cfg = load_config(config_path)
        payload["config"] = cfg.resolved
        res = _DISPATCH[command](cfg, args)
    except ConfigError as exc:
        payload["error"] = {"type": "ConfigError", "message": str(exc)}
        write_json(stem + ".json", payload)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (WeakTreeError, ValueError, ArithmeticError) as exc:
        payload["error"] = {"type": type(exc).__name__, "message": str(exc)}
        write_json(stem + ".json", payload)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    payload["result"] = res.result
    payload["verdict"] = res.verdict
    payload["passed"] = res.passed
    write_json(stem + ".json", payload)
    if res.csv is not None:
        with open(stem + ".csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(res.csv)
    if res.svg is not None:
        with open(stem + ".svg", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(res.svg)
    print(f"{command}: {res.verdict}", file=stream)
    return 0 if res.passed else 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    a = build_parser().parse_args(argv)
    if a.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    return run(a.command, a.config, a.out, threads=a.threads,
               compare_direct=a.compare_direct, svg=a.svg)


if __name__ == "__main__":
    sys.exit(main())
