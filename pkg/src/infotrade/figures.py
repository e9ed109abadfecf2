"""Static SVG drawings of payoff regions.

Buyer payoff runs along the horizontal axis and seller payoff along the
vertical one.  Polygons are drawn from their exact vertex lists.
"""

from __future__ import annotations

from collections.abc import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .geometry import PayoffRegion

SIZE = 600
MARGIN = 60
FILLS = ("#dbe9f6", "#9ecae1", "#4292c6", "#fdd0a2")


def _bounds(regions: Sequence[PayoffRegion]) -> tuple[float, float, float, float]:
    pts = np.vstack([r.as_array() for r in regions])
    x_lo, y_lo = min(0.0, pts[:, 0].min()), min(0.0, pts[:, 1].min())
    x_hi, y_hi = pts[:, 0].max(), pts[:, 1].max()
    span = max(x_hi - x_lo, y_hi - y_lo, 1e-12)
    return x_lo, y_lo, x_lo + span, y_lo + span


def regions_svg(regions: Sequence[PayoffRegion], title: str = "") -> str:
    """Draw regions back to front (first is largest) with corner labels."""
    if not regions:
        raise ValueError("nothing to draw")
    x_lo, y_lo, x_hi, y_hi = _bounds(regions)
    inner = SIZE - 2 * MARGIN

    def to_px(x: float, y: float) -> tuple[float, float]:
        px = MARGIN + (x - x_lo) / (x_hi - x_lo) * inner
        py = SIZE - MARGIN - (y - y_lo) / (y_hi - y_lo) * inner
        return round(px, 3), round(py, 3)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" width="{SIZE}" height="{SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
    ]
    ox, oy = to_px(x_lo, y_lo)
    out.append(f'<line x1="{ox}" y1="{oy}" x2="{SIZE - MARGIN}" y2="{oy}" stroke="black"/>')
    out.append(f'<line x1="{ox}" y1="{oy}" x2="{ox}" y2="{MARGIN}" stroke="black"/>')
    out.append(f'<text x="{SIZE - MARGIN}" y="{oy + 30}" text-anchor="end" font-size="14">buyer payoff</text>')
    out.append(
        f'<text x="{ox - 40}" y="{MARGIN}" font-size="14" transform="rotate(-90 {ox - 40} {MARGIN})" '
        'text-anchor="end">seller payoff</text>'
    )
    if title:
        out.append(f'<text x="{SIZE / 2}" y="30" text-anchor="middle" font-size="16">{escape(title)}</text>')
    for k, region in enumerate(regions):
        pts = " ".join(f"{px},{py}" for px, py in (to_px(x, y) for x, y in region.vertices))
        fill = FILLS[k % len(FILLS)]
        out.append(
            f'<polygon points="{pts}" fill="{fill}" fill-opacity="0.8" stroke="black" '
            f'data-kind="{escape(region.kind)}"/>'
        )
        for label, idx in sorted(region.labels.items()):
            px, py = to_px(*region.vertices[idx])
            out.append(f'<text x="{px + 4}" y="{py - 4}" font-size="13">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
