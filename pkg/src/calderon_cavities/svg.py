"""Minimal SVG 1.1 rendering of a scene and reconstructed disks."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .geometry import Scene
from .prony import DiskSet

SIZE = 600
MARGIN = 0.05


def _bounds(scene: Scene) -> tuple[float, float, float]:
    z = scene.outer.polygon(512)
    x0, x1, y0, y1 = z.real.min(), z.real.max(), z.imag.min(), z.imag.max()
    span = max(x1 - x0, y1 - y0) * (1 + 2 * MARGIN)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return cx - span / 2, cy - span / 2, span


def svg_document(scene: Scene, disks: DiskSet | None = None, *, title: str = "",
                 samples: int = 400) -> str:
    """SVG text; ``scene`` and ``disks`` are in the same coordinates.

    The y axis is flipped so that the picture has the usual orientation.
    """
    x0, y0, span = _bounds(scene)
    scale = SIZE / span

    def xy(z):
        return (np.real(z) - x0) * scale, SIZE - (np.imag(z) - y0) * scale

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" '
        f'height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
    ]
    for k, curve in enumerate(scene.curves):
        x, y = xy(curve.polygon(samples))
        pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(x, y))
        color = "black" if k == 0 else "#1f4e9c"
        parts.append(f'<polygon points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    if disks is not None:
        for center, radius in zip(disks.centers, disks.radii):
            cx, cy = xy(center)
            if radius > 0:
                parts.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{radius * scale:.3f}" '
                             'fill="none" stroke="#2a9d2a" stroke-width="1.2"/>')
            parts.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="2.5" fill="red" stroke="none"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_svg(scene: Scene, disks: DiskSet | None, path: str | Path, *, title: str = "") -> Path:
    path = Path(path)
    path.write_text(svg_document(scene, disks, title=title))
    return path
