"""Trajectory CSV and SVG writers.

CSV columns are ``k,t,x,u,f,b,event``.  One row per sampling instant
carries the held control and the plant data of the interval that starts
there; the row for the last instant leaves ``u,f,b`` blank and has event
``final``.  Dense sub-samples follow their interval's row with event
``dense`` and repeat that interval's ``u,f,b``.  Numbers are written with 17
significant digits so that :func:`read_csv` reconstructs the trajectory
exactly.

Event tokens (joined with ``;``): ``crossed`` (sign change inside the
interval), ``converged`` (first instant with ``|x| <= eps``), ``final``,
``overflow``, ``truncated=<reason>``.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .model import DensePoint, StepRecord, Trajectory

COLUMNS = ("k", "t", "x", "u", "f", "b", "event")


def _num(v: float) -> str:
    return "%.17g" % v


def csv_rows(traj: Trajectory):
    dense_by_k: dict = {}
    for p in traj.dense:
        dense_by_k.setdefault(p.k, []).append(p)
    for s in traj.steps:
        ev = []
        if s.crossed:
            ev.append("crossed")
        if traj.converged_at == s.k:
            ev.append("converged")
        yield [str(s.k), _num(s.t), _num(s.x), _num(s.u), _num(s.f), _num(s.b), ";".join(ev)]
        for p in dense_by_k.get(s.k, ()):
            yield [str(p.k), _num(p.t), _num(p.x), _num(s.u), _num(s.f), _num(s.b), "dense"]
    ev = ["final"]
    if traj.converged_at == traj.n_steps:
        ev.append("converged")
    if traj.overflow:
        ev.append("overflow")
    if traj.truncated:
        ev.append(f"truncated={traj.truncated}")
    yield [str(traj.n_steps), _num(traj.t_end), _num(traj.x_end), "", "", "", ";".join(ev)]


def write_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(csv_rows(traj))


def read_csv(path) -> Trajectory:
    """Inverse of :func:`write_csv` (identifiers and config hash are not stored)."""
    traj = Trajectory()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(COLUMNS)}, got {header}")
        for n, row in enumerate(reader, start=2):
            if len(row) != len(COLUMNS):
                raise ValueError(f"{path}:{n}: expected {len(COLUMNS)} fields, got {len(row)}")
            k = int(row[0])
            t, x = float(row[1]), float(row[2])
            events = set(row[6].split(";")) if row[6] else set()
            if "dense" in events:
                traj.dense.append(DensePoint(k, t, x))
                continue
            if "converged" in events:
                traj.converged_at = k
            if "final" in events:
                traj.t_end, traj.x_end = t, x
                traj.overflow = traj.diverged = "overflow" in events
                for e in events:
                    if e.startswith("truncated="):
                        traj.truncated = e.split("=", 1)[1]
                continue
            traj.steps.append(StepRecord(k, t, x, float(row[3]), float(row[4]), float(row[5]),
                                         "crossed" in events))
    return traj


# -- SVG ---------------------------------------------------------------------

def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def svg_plot(traj: Trajectory, title: str = "", width: int = 720, height: int = 420) -> str:
    """Single-panel plot of ``x`` against ``t``, sampling instants marked.

    When ``|x|`` spans more than four decades the vertical axis shows
    ``sign(x) log10(1 + |x|)`` instead.
    """
    pts = [(s.t, s.x) for s in traj.steps] + [(traj.t_end, traj.x_end)]
    pts = [(t, x) for t, x in pts if math.isfinite(x)]
    line = sorted(pts + [(p.t, p.x) for p in traj.dense if math.isfinite(p.x)])
    mags = [abs(x) for _, x in pts if x != 0.0]
    squash = bool(mags) and max(mags) / min(mags) > 1e4

    def yv(x):
        return math.copysign(math.log10(1.0 + abs(x)), x) if squash else x

    ml, mr, mt, mb = 70, 20, 36, 46
    ts = [t for t, _ in line] or [0.0, 1.0]
    ys = [yv(x) for _, x in line] or [0.0]
    t0, t1 = min(ts), max(ts)
    y0, y1 = min(ys + [0.0]), max(ys + [0.0])
    if t1 == t0:
        t1 = t0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - ml - mr, height - mt - mb

    def px(t):
        return ml + (t - t0) / (t1 - t0) * pw

    def py(y):
        return mt + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="white" stroke="#444"/>']
    if y0 < 0.0 < y1:
        out.append(f'<line x1="{ml}" y1="{py(0):.2f}" x2="{ml + pw}" y2="{py(0):.2f}" '
                   'stroke="#bbb" stroke-dasharray="4 3"/>')
    for t in _ticks(t0, t1):
        out.append(f'<text x="{px(t):.2f}" y="{mt + ph + 16}" text-anchor="middle">{t:.4g}</text>')
    for y in _ticks(y0, y1):
        out.append(f'<text x="{ml - 6}" y="{py(y) + 4:.2f}" text-anchor="end">{y:.4g}</text>')
    if line:
        path = " ".join(f"{px(t):.2f},{py(yv(x)):.2f}" for t, x in line)
        out.append(f'<polyline points="{path}" fill="none" stroke="#1f5fa8" stroke-width="1.4"/>')
    if len(pts) <= 2000:
        for t, x in pts:
            out.append(f'<circle cx="{px(t):.2f}" cy="{py(yv(x)):.2f}" r="2.2" fill="#c0392b"/>')
    ylabel = "sign(x) log10(1+|x|)" if squash else "x"
    out.append(f'<text x="{ml + pw / 2}" y="{height - 8}" text-anchor="middle">t</text>')
    out.append(f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{ml}" y="22" font-size="13">{_escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(traj: Trajectory, path, title: str = "") -> None:
    Path(path).write_text(svg_plot(traj, title))
