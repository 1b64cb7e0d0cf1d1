"""Deterministic JSON/CSV report writers and a minimal SVG log-log plot."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Optional, Sequence

import numpy as np

__all__ = ["SCHEMA_VERSION", "CSV_COLUMNS", "to_jsonable", "dumps_json", "write_json",
           "records_csv", "write_csv", "loglog_svg", "svg_from_csv"]

SCHEMA_VERSION = 1
CSV_COLUMNS = ("lambda", "E1", "E_minus", "E_plus", "N_minus", "bound_cor1", "certified_channels")


def to_jsonable(obj):
    """Convert numpy scalars, tuples and non-finite floats into plain JSON values.

    ``nan`` becomes ``null``; infinities become the strings ``"inf"``/``"-inf"``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps_json(payload: dict) -> str:
    body = dict(payload)
    body["schema_version"] = SCHEMA_VERSION
    return json.dumps(to_jsonable(body), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(payload))


def _cell(x):
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def records_csv(records: Sequence) -> str:
    """Sweep records as CSV with the fixed column order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_cell(r.lam), _cell(r.E1), _cell(r.E_minus), _cell(r.E_plus), _cell(r.N_minus),
                    _cell(r.bound_cor1), _cell(r.certified_channels)])
    return buf.getvalue()


def write_csv(path: str, records: Sequence) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_csv(records))


def _ticks(lo, hi):
    return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1)]


def loglog_svg(
    x: Sequence[float],
    y: Sequence[float],
    fit: Optional[tuple] = None,
    *,
    title: str = "",
    xlabel: str = "lambda",
    ylabel: str = "|E1|",
    width: int = 480,
    height: int = 360,
) -> str:
    """Log-log scatter of ``(x, |y|)`` with an optional fit line ``log|y| = a log x + b``.

    ``fit = (slope, intercept)`` in natural logarithms.
    """
    pts = [(float(a), abs(float(b))) for a, b in zip(x, y)
           if a > 0 and b == b and b != 0 and math.isfinite(b)]
    if not pts:
        raise ValueError("nothing to plot")
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    x0, x1 = float(lx.min()), float(lx.max())
    y0, y1 = float(ly.min()), float(ly.max())
    padx = max(0.05 * (x1 - x0), 0.1)
    pady = max(0.05 * (y1 - y0), 0.1)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        v = math.log10(t)
        if x0 <= v <= x1:
            out.append(f'<line x1="{px(v):.2f}" y1="{mt + ph}" x2="{px(v):.2f}" y2="{mt + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{px(v):.2f}" y="{mt + ph + 18}" font-size="11" text-anchor="middle">1e{int(v)}</text>')
    for t in _ticks(y0, y1):
        v = math.log10(t)
        if y0 <= v <= y1:
            out.append(f'<line x1="{ml - 5}" y1="{py(v):.2f}" x2="{ml}" y2="{py(v):.2f}" stroke="black"/>')
            out.append(f'<text x="{ml - 8}" y="{py(v) + 4:.2f}" font-size="11" text-anchor="end">1e{int(v)}</text>')
    if fit is not None:
        a, b = fit
        xa, xb = x0 + padx, x1 - padx
        ya = (a * xa * math.log(10) + b) / math.log(10)
        yb = (a * xb * math.log(10) + b) / math.log(10)
        out.append(f'<line x1="{px(xa):.2f}" y1="{py(ya):.2f}" x2="{px(xb):.2f}" y2="{py(yb):.2f}" '
                   'stroke="#c0392b" stroke-width="1.5"/>')
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="#1f4e79"/>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" font-size="13" text-anchor="middle">{title}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" font-size="12" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2:.1f}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 15 {mt + ph / 2:.1f})">{ylabel}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_from_csv(text: str, fit: Optional[tuple] = None, **kwargs) -> str:
    """Plot ``|E1|`` against ``lambda`` from sweep CSV text."""
    rows = list(csv.DictReader(io.StringIO(text)))
    x = [float(r["lambda"]) for r in rows if r["E1"]]
    y = [float(r["E1"]) for r in rows if r["E1"]]
    return loglog_svg(x, y, fit, **kwargs)
