"""Minimal self-contained SVG line chart, so plotting needs no extra dependency."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22")


def line_chart(frame: pd.DataFrame, title: str = "", width: int = 720, height: int = 360) -> str:
    """Plot every column of ``frame`` against its row order."""
    vals = frame.to_numpy(dtype=float)
    n = vals.shape[0]
    left, right, top, bottom = 50, 130, 30, 30
    pw, ph = width - left - right, height - top - bottom
    lo, hi = np.nanmin(vals), np.nanmax(vals)
    if not np.isfinite(lo) or hi == lo:
        lo, hi = (0.0, 1.0) if not np.isfinite(lo) else (lo - 1.0, hi + 1.0)

    def xy(i, v):
        x = left + (pw * i / max(n - 1, 1))
        y = top + ph * (hi - v) / (hi - lo)
        return f"{x:.1f},{y:.1f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="18" font-size="13">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left - 5}" y="{top + 4}" text-anchor="end">{hi:.2f}</text>',
        f'<text x="{left - 5}" y="{top + ph}" text-anchor="end">{lo:.2f}</text>',
    ]
    if lo < 0 < hi:
        out.append(f'<line x1="{left}" y1="{xy(0, 0).split(",")[1]}" x2="{left + pw}" y2="{xy(0, 0).split(",")[1]}" stroke="#ccc"/>')
    if n:
        out.append(f'<text x="{left}" y="{height - 10}">{escape(str(frame.index[0])[:10])}</text>')
        out.append(f'<text x="{left + pw}" y="{height - 10}" text-anchor="end">{escape(str(frame.index[-1])[:10])}</text>')
    for j, col in enumerate(frame.columns):
        color = PALETTE[j % len(PALETTE)]
        pts = " ".join(xy(i, v) for i, v in enumerate(vals[:, j]) if np.isfinite(v))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 * j
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 25}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 30}" y="{ly + 4}">{escape(str(col))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
