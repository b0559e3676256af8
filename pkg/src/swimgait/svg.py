"""Minimal self-contained SVG heatmap writer.

Deterministic output for identical input: no timestamps, fixed float
formatting, inline styles only. Diverging colormap centered at zero
(blue negative, red positive), gray for missing cells, optional zero
contour overlay and a vertical color legend.
"""

from __future__ import annotations

import math

import numpy as np

_NEG = (33, 102, 172)
_POS = (178, 24, 43)
_MISSING = "#b4b4b4"
_FONT = "font-family:Helvetica,Arial,sans-serif"


def _color(v: float, vmax: float) -> str:
    if not math.isfinite(v):
        return _MISSING
    t = max(-1.0, min(1.0, v / vmax)) if vmax > 0 else 0.0
    base = _POS if t >= 0 else _NEG
    f = abs(t)
    r = round(255 + f * (base[0] - 255))
    g = round(255 + f * (base[1] - 255))
    b = round(255 + f * (base[2] - 255))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_heatmap(
    values,
    extent: tuple[float, float],
    *,
    contour_segments=None,
    width: int = 720,
    height: int = 560,
    label_x: str = "alpha1",
    label_y: str = "alpha2",
    title: str | None = None,
) -> str:
    """Render an n-by-n node-centered field to an SVG string.

    ``values[i, j]`` is the sample at (axis[i], axis[j]); the first
    index runs along the horizontal axis.
    """
    vals = np.asarray(values, dtype=float)
    n = vals.shape[0]
    lo, hi = extent
    cell = (hi - lo) / (n - 1)
    finite = vals[np.isfinite(vals)]
    vmax = float(np.abs(finite).max()) if finite.size else 1.0
    if vmax == 0.0:
        vmax = 1.0

    ml, mr, mt, mb = 62, 104, 40 if title else 18, 52
    pw, ph = width - ml - mr, height - mt - mb

    def sx(a: float) -> float:
        return ml + (a - (lo - cell / 2)) / (hi - lo + cell) * pw

    def sy(a: float) -> float:
        return mt + ph - (a - (lo - cell / 2)) / (hi - lo + cell) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        out.append(
            f'<text x="{ml + pw / 2:.2f}" y="24" text-anchor="middle" '
            f'style="{_FONT};font-size:15px">{title}</text>'
        )

    cw = pw / n + 0.5
    ch = ph / n + 0.5
    out.append('<g shape-rendering="crispEdges">')
    for i in range(n):
        x = sx(lo + i * cell - cell / 2)
        for j in range(n):
            y = sy(lo + j * cell + cell / 2)
            out.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                f'fill="{_color(vals[i, j], vmax)}"/>'
            )
    out.append("</g>")

    if contour_segments:
        out.append('<g id="zero-contour" stroke="#000000" stroke-width="1.2">')
        for (x0, y0), (x1, y1) in contour_segments:
            out.append(
                f'<polyline fill="none" points="{sx(x0):.2f},{sy(y0):.2f} '
                f'{sx(x1):.2f},{sy(y1):.2f}"/>'
            )
        out.append("</g>")

    # frame and ticks
    out.append(
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="#333333" stroke-width="1"/>'
    )
    for t in np.linspace(lo, hi, 5):
        x = sx(t)
        y = sy(t)
        out.append(
            f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 5}" '
            f'stroke="#333333"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{mt + ph + 18}" text-anchor="middle" '
            f'style="{_FONT};font-size:11px">{t:.3g}</text>'
        )
        out.append(
            f'<line x1="{ml - 5}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="#333333"/>'
        )
        out.append(
            f'<text x="{ml - 8}" y="{y + 4:.2f}" text-anchor="end" '
            f'style="{_FONT};font-size:11px">{t:.3g}</text>'
        )
    out.append(
        f'<text x="{ml + pw / 2:.2f}" y="{height - 14}" text-anchor="middle" '
        f'style="{_FONT};font-size:13px">{label_x}</text>'
    )
    out.append(
        f'<text x="16" y="{mt + ph / 2:.2f}" text-anchor="middle" '
        f'style="{_FONT};font-size:13px" '
        f'transform="rotate(-90 16 {mt + ph / 2:.2f})">{label_y}</text>'
    )

    # legend
    lx = ml + pw + 18
    lh = ph * 0.8
    ly = mt + (ph - lh) / 2
    steps = 33
    for k in range(steps):
        frac = 1.0 - (k + 0.5) / steps
        v = (2.0 * frac - 1.0) * vmax
        out.append(
            f'<rect x="{lx}" y="{ly + k * lh / steps:.2f}" width="16" '
            f'height="{lh / steps + 0.5:.2f}" fill="{_color(v, vmax)}"/>'
        )
    out.append(
        f'<rect x="{lx}" y="{ly:.2f}" width="16" height="{lh:.2f}" fill="none" '
        f'stroke="#333333" stroke-width="0.8"/>'
    )
    for frac, val in ((0.0, vmax), (0.5, 0.0), (1.0, -vmax)):
        out.append(
            f'<text x="{lx + 21}" y="{ly + frac * lh + 4:.2f}" '
            f'style="{_FONT};font-size:11px">{val:.3g}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
