"""Self-contained SVG line charts for simulation logs.

Each chart is a single ``<svg>`` document with one ``<polyline>`` per
series (``class="series"``, ``data-name`` set to the series label), optional
horizontal reference lines (``class="ref"``, ``data-value``) and the axis
bounds recorded as ``data-xmin``/``data-xmax``/``data-ymin``/``data-ymax``
attributes on the root element.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from tailsitter.mathkin import euler_from_quat

WIDTH, HEIGHT = 720, 360
MARGIN = 50
MAX_POINTS = 2000
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def axis_bounds(series: list[np.ndarray], refs: tuple[float, ...] = ()) -> tuple[float, float]:
    """Min and max over every finite sample, padded when the range is empty."""
    vals = [np.asarray(s, float)[np.isfinite(s)] for s in series]
    vals = [v for v in vals if v.size] + ([np.asarray(refs, float)] if refs else [])
    if not vals:
        return -1.0, 1.0
    lo = min(float(v.min()) for v in vals)
    hi = max(float(v.max()) for v in vals)
    if hi - lo < 1e-12:
        pad = max(abs(lo), 1.0) * 0.05
        return lo - pad, hi + pad
    return lo, hi


def line_chart(
    t: np.ndarray,
    series: dict[str, np.ndarray],
    title: str,
    ylabel: str,
    refs: tuple[float, ...] = (),
    step: bool = False,
) -> str:
    """SVG text for a multi-series chart against ``t``."""
    t = np.asarray(t, float)
    if t.size == 0:
        raise ValueError("empty log")
    xmin, xmax = float(t[0]), float(t[-1])
    if xmax <= xmin:
        xmax = xmin + 1.0
    ymin, ymax = axis_bounds(list(series.values()), refs)
    w, h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - xmin) / (xmax - xmin) * w

    def sy(y):
        return MARGIN + h - (y - ymin) / (ymax - ymin) * h

    stride = max(1, -(-t.size // MAX_POINTS))
    idx = np.arange(0, t.size, stride)
    if idx[-1] != t.size - 1:
        idx = np.append(idx, t.size - 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'data-xmin="{xmin!r}" data-xmax="{xmax!r}" data-ymin="{ymin!r}" data-ymax="{ymax!r}">',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle">{escape(title)}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="#000"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle">t [s]</text>',
        f'<text x="12" y="{HEIGHT / 2}" transform="rotate(-90 12 {HEIGHT / 2})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" text-anchor="end" font-size="10">{ymax:.4g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + h}" text-anchor="end" font-size="10">{ymin:.4g}</text>',
        f'<text x="{MARGIN}" y="{MARGIN + h + 14}" font-size="10">{xmin:.4g}</text>',
        f'<text x="{MARGIN + w}" y="{MARGIN + h + 14}" text-anchor="end" font-size="10">{xmax:.4g}</text>',
    ]
    for r in refs:
        y = sy(r)
        out.append(f'<line class="ref" data-value="{r!r}" x1="{MARGIN}" x2="{MARGIN + w}" '
                   f'y1="{y:.2f}" y2="{y:.2f}" stroke="#888" stroke-dasharray="4 3"/>')
    for k, (name, ys) in enumerate(series.items()):
        ys = np.asarray(ys, float)
        pts = []
        prev = None
        for i in idx:
            if not np.isfinite(ys[i]):
                continue
            if step and prev is not None:
                pts.append(f"{sx(t[i]):.2f},{sy(prev):.2f}")
            pts.append(f"{sx(t[i]):.2f},{sy(ys[i]):.2f}")
            prev = ys[i]
        color = COLORS[k % len(COLORS)]
        out.append(f'<polyline class="series" data-name="{escape(name)}" fill="none" '
                   f'stroke="{color}" points="{" ".join(pts)}"/>')
        out.append(f'<text x="{MARGIN + 8 + 90 * k}" y="{MARGIN - 8}" fill="{color}" '
                   f'font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plots(log, out_dir: str | Path, thresholds: tuple[float, ...] = (250.0, 400.0)) -> list[Path]:
    """Write position, attitude, command, Lyapunov and jump charts.

    ``log`` is a :class:`tailsitter.sim.SimLog`.
    """
    if len(log) == 0:
        raise ValueError("empty log")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = log.t
    euler = np.degrees(np.array([euler_from_quat(q) for q in log.q]))
    phys = log.physical
    V = log.column("V")
    charts = {
        "position.svg": line_chart(t, {"x": log.p[:, 0], "y": log.p[:, 1], "z": log.p[:, 2]},
                                   "Position", "m"),
        "attitude.svg": line_chart(t, {"roll": euler[:, 0], "pitch": euler[:, 1],
                                       "yaw": euler[:, 2]}, "Attitude (ZYX)", "deg"),
        "motors.svg": line_chart(t, {"omega_1": phys[:, 0], "omega_2": phys[:, 1]},
                                 "Motor speeds", "rad/s"),
        "elevons.svg": line_chart(t, {"delta_1": np.degrees(phys[:, 2]),
                                      "delta_2": np.degrees(phys[:, 3])}, "Elevons", "deg"),
        "lyapunov.svg": line_chart(t, {"V": V}, "Lyapunov value", "V", refs=thresholds),
        "jumps.svg": line_chart(t, {"j": log.column("j")}, "Jump count", "j", step=True),
    }
    paths = []
    for name, text in charts.items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths
