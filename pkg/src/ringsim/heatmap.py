"""Self-contained SVG heatmaps from grid-complete CSV tables."""

from __future__ import annotations

import math

import numpy as np

from .tables import atomic_write_text, read_table

__all__ = ["RaggedGridError", "grid_from_rows", "color_for", "render_svg", "render_heatmap", "PALETTES"]

PALETTES = {
    # perceptually ordered stops, dark to light
    "viridis": ["#440154", "#3b528b", "#21918c", "#5ec962", "#fde725"],
    "gray": ["#000000", "#ffffff"],
    "magma": ["#000004", "#51127c", "#b73779", "#fc8961", "#fcfdbf"],
}


class RaggedGridError(ValueError):
    pass


def grid_from_rows(rows, x, y, z):
    """Sorted axes and a (len(xs), len(ys)) array; every (x, y) pair must appear once."""
    try:
        pts = [(float(r[x]), float(r[y]), float(r[z])) for r in rows]
    except KeyError as exc:
        raise KeyError(f"column {exc} not in table") from None
    xs = sorted({p[0] for p in pts})
    ys = sorted({p[1] for p in pts})
    if len(pts) != len(xs) * len(ys):
        raise RaggedGridError(f"{len(pts)} rows do not fill a {len(xs)}x{len(ys)} grid")
    ix = {v: i for i, v in enumerate(xs)}
    iy = {v: i for i, v in enumerate(ys)}
    Z = np.full((len(xs), len(ys)), np.nan)
    seen = np.zeros(Z.shape, bool)
    for a, b, c in pts:
        i, j = ix[a], iy[b]
        if seen[i, j]:
            raise RaggedGridError(f"duplicate grid point ({a}, {b})")
        seen[i, j] = True
        Z[i, j] = c
    return np.array(xs), np.array(ys), Z


def _hex(c):
    return int(c[1:3], 16), int(c[3:5], 16), int(c[5:7], 16)


def color_for(u, palette="viridis"):
    """Color at position u in [0, 1] by linear interpolation between stops."""
    stops = [_hex(c) for c in PALETTES[palette]]
    if not math.isfinite(u):
        return "#808080"
    u = min(max(u, 0.0), 1.0) * (len(stops) - 1)
    k = min(int(u), len(stops) - 2)
    f = u - k
    rgb = [round(a + (b - a) * f) for a, b in zip(stops[k], stops[k + 1])]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _normalize(Z, log):
    V = np.asarray(Z, dtype=float)
    if log:
        if np.any(V[np.isfinite(V)] <= 0):
            raise ValueError("log color scale needs positive values")
        V = np.log10(V)
    finite = V[np.isfinite(V)]
    if finite.size == 0:
        return np.full(V.shape, np.nan)
    lo, hi = finite.min(), finite.max()
    if hi == lo:
        return np.where(np.isfinite(V), 0.5, np.nan)
    return (V - lo) / (hi - lo)


def render_svg(xs, ys, Z, palette="viridis", log=False, cell=12, title="", xlabel="", ylabel=""):
    """SVG text: one rect per cell, x to the right and y upward."""
    U = _normalize(Z, log)
    nx, ny = U.shape
    pad = 40
    w, h = nx * cell + 2 * pad, ny * cell + 2 * pad
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f"<title>{title}</title>",
        '<g id="cells" shape-rendering="crispEdges">',
    ]
    for i in range(nx):
        for j in range(ny):
            px = pad + i * cell
            py = pad + (ny - 1 - j) * cell
            out.append(
                f'<rect x="{px}" y="{py}" width="{cell}" height="{cell}" fill="{color_for(U[i, j], palette)}" '
                f'data-x="{xs[i]:.12g}" data-y="{ys[j]:.12g}" data-z="{Z[i, j]:.12g}"/>'
            )
    out.append("</g>")
    out.append(f'<text x="{w / 2}" y="{h - 10}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(
        f'<text x="12" y="{h / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 12 {h / 2})">{ylabel}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_heatmap(csv_path, x, y, z, out_path, palette="viridis", log=False):
    rows, _ = read_table(csv_path)
    xs, ys, Z = grid_from_rows(rows, x, y, z)
    svg = render_svg(xs, ys, Z, palette=palette, log=log, title=f"{z} over ({x}, {y})", xlabel=x, ylabel=y)
    return atomic_write_text(out_path, svg)
