"""Displacement plots as standalone SVG, plus a CSV of the plotted curve."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .kinematics import TWO_PI, LinkageDims, TypeConfig
from .metrics import displacement_curve

WIDTH, HEIGHT, MARGIN = 640, 420, 56


def unwrap_continuous(angles) -> np.ndarray:
    """Shift each angle by a multiple of 2 pi to minimise the jump from its predecessor."""
    a = np.asarray(angles, dtype=float).copy()
    for i in range(1, len(a)):
        a[i] -= TWO_PI * round((a[i] - a[i - 1]) / TWO_PI)
    return a


def _align(values, reference: np.ndarray) -> np.ndarray:
    """Shift each marker by 2 pi multiples to sit nearest the curve's level range."""
    mid = 0.5 * (reference.min() + reference.max())
    v = np.asarray(values, dtype=float)
    return v - TWO_PI * np.round((v - mid) / TWO_PI)


def curve_csv(path, curve_deg: np.ndarray) -> None:
    lines = ["theta_in_deg,theta_out_deg"] + [f"{a!r},{b!r}" for a, b in curve_deg.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    span = hi - lo
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step) + 1)]


def render_svg(curve_deg: np.ndarray, markers_deg: np.ndarray, title: str) -> str:
    xs = np.concatenate([curve_deg[:, 0], markers_deg[:, 0]])
    ys = np.concatenate([curve_deg[:, 1], markers_deg[:, 1]])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 1, x1 + 1
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{HEIGHT - MARGIN}" x2="{px(t):.2f}" y2="{HEIGHT - MARGIN + 4}" stroke="#444"/>')
        out.append(f'<text x="{px(t):.2f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{MARGIN - 4}" y1="{py(t):.2f}" x2="{MARGIN}" y2="{py(t):.2f}" stroke="#444"/>')
        out.append(f'<text x="{MARGIN - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">input angle (deg)</text>')
    out.append(
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 14 {HEIGHT / 2})">output angle (deg)</text>'
    )
    path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in curve_deg.tolist())
    out.append(f'<polyline points="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    for x, y in markers_deg.tolist():
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="#d62728"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_displacement(path, r: LinkageDims, cfg: TypeConfig, points, num: int = 361) -> tuple[Path, Path]:
    """Write ``path`` (SVG) and a sibling CSV of the curve. ``points`` in radians."""
    curve = displacement_curve(r, cfg, num)
    outs = unwrap_continuous(curve[:, 1])
    curve_deg = np.degrees(np.column_stack([curve[:, 0], outs]))
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    markers = np.column_stack([pts[:, 0], _align(pts[:, 1], outs)])
    path = Path(path)
    path.write_text(render_svg(curve_deg, np.degrees(markers), f"{cfg.label}  r = {tuple(round(v, 4) for v in r)}"))
    csv_path = path.with_suffix(".csv")
    curve_csv(csv_path, curve_deg)
    return path, csv_path
